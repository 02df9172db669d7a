"""Static and dynamic load-altering attacks on the vulnerable load portion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ParameterError
from .grid.case import GridCase
from .grid.linear import ReducedSystem, dlaa_matrix, sensing_matrix, spectral_abscissa

TWO_PI = 2.0 * math.pi
MARGINAL = 1e-6   # |Re(lambda)| below this counts as marginal, not unstable


def _targets(case: GridCase, buses) -> np.ndarray:
    bad = [b for b in buses if b not in case.load_index]
    if bad:
        raise ConfigError(f"attack targets {bad} are not load buses")
    return np.array([case.load_index[b] for b in buses], dtype=int)


@dataclass(frozen=True)
class SlaaSpec:
    buses: tuple[int, ...]
    fractions: tuple[float, ...]
    start: float = 30.0

    def __post_init__(self):
        if len(self.buses) != len(self.fractions):
            raise ConfigError("SLAA needs one fraction per target bus")
        if any(f < 0 for f in self.fractions) or self.start < 0:
            raise ConfigError("SLAA fractions and start time must be >= 0")

    kind = "slaa"

    def to_dict(self) -> dict:
        return {"type": "slaa", "buses": list(self.buses), "fractions": list(self.fractions),
                "start_s": self.start}


def slaa_inject(spec: SlaaSpec, time: float, nominal: np.ndarray, case: GridCase) -> np.ndarray:
    """Step increase of ``fraction * nominal`` on each target from ``start`` on."""
    if not math.isfinite(time):
        raise ParameterError("time must be finite")
    eps = np.zeros(case.n_load)
    if time + 1e-12 < spec.start:
        return eps
    idx = _targets(case, spec.buses)
    eps[idx] = np.asarray(spec.fractions) * np.asarray(nominal)[idx]
    return eps


@dataclass(frozen=True)
class DlaaSpec:
    """Frequency-feedback attack ``eps = -K * d_omega`` on the target buses.

    ``source`` selects the sensed frequency: ``"coi"`` for the
    centre-of-inertia average or a generator bus id. ``kick`` is an optional
    static step (fraction of target load) switched on at ``start`` that gives
    the feedback something to amplify.
    """

    buses: tuple[int, ...]
    gains: tuple[float, ...]
    start: float = 30.0
    source: str | int = "coi"
    kick: float = 0.0
    unit: str = "pu/Hz"          # or "pu/(rad/s)"
    period: float | None = None   # actuation period; None = every grid step

    kind = "dlaa"

    def __post_init__(self):
        if len(self.buses) != len(self.gains):
            raise ConfigError("DLAA needs one gain per target bus")
        if any(not (k > 0 and math.isfinite(k)) for k in self.gains):
            raise ConfigError("DLAA gains on targets must be finite and > 0")
        if self.unit not in ("pu/Hz", "pu/(rad/s)"):
            raise ConfigError(f"unknown gain unit {self.unit!r}")
        if self.start < 0 or self.kick < 0:
            raise ConfigError("DLAA start and kick must be >= 0")

    def gains_per_hz(self) -> np.ndarray:
        k = np.asarray(self.gains, float)
        return k * TWO_PI if self.unit == "pu/(rad/s)" else k

    def gain_vector(self, case: GridCase) -> np.ndarray:
        k = np.zeros(case.n_load)
        k[_targets(case, self.buses)] = self.gains_per_hz()
        return k

    def weights(self, case: GridCase) -> np.ndarray:
        return sensing_weights(case, self.source)

    def to_dict(self) -> dict:
        d = {"type": "dlaa", "buses": list(self.buses), "gains": list(self.gains),
             "start_s": self.start, "source": self.source, "kick": self.kick, "unit": self.unit}
        if self.period is not None:
            d["period_s"] = self.period
        return d


def sensing_weights(case: GridCase, source) -> np.ndarray:
    if source == "coi":
        return case.coi_weights
    if source in case.gen_index:
        w = np.zeros(case.n_gen)
        w[case.gen_index[source]] = 1.0
        return w
    raise ConfigError(f"unknown frequency source {source!r}")


def saturate(eps: np.ndarray, capacity: np.ndarray) -> np.ndarray:
    return np.clip(eps, -capacity, capacity)


def dlaa_inject(spec: DlaaSpec, measured_dw: float | None, time: float, case: GridCase,
                connected: np.ndarray | None = None, last: np.ndarray | None = None) -> np.ndarray:
    """Injection for a sensed frequency deviation (Hz).

    ``connected`` is the fraction of each bus still connected after load
    shedding; it scales both the reachable capacity and the effective gain.
    A missing measurement holds ``last``.
    """
    zero = np.zeros(case.n_load)
    if time + 1e-12 < spec.start:
        return zero
    if measured_dw is None:
        return zero if last is None else last.copy()
    if connected is None:
        connected = np.ones(case.n_load)
    k = spec.gain_vector(case) * connected
    eps = -k * measured_dw
    if spec.kick:
        eps[_targets(case, spec.buses)] += spec.kick * (case.nominal_load * connected)[_targets(case, spec.buses)]
    capacity = case.vulnerable_fraction * case.nominal_load * connected
    return saturate(eps, capacity)


def attack_capacity(case: GridCase, connected: np.ndarray | None = None) -> np.ndarray:
    c = np.ones(case.n_load) if connected is None else connected
    return case.vulnerable_fraction * case.nominal_load * c


# ---------------------------------------------------------------------------
# critical gain


@dataclass
class CriticalGainReport:
    buses: tuple[int, ...]
    k_crit: float | None
    tol: float
    k_max: float
    table: list[tuple[float, float]] = field(default_factory=list)

    @property
    def stable_throughout(self) -> bool:
        return self.k_crit is None

    def to_dict(self) -> dict:
        return {"buses": list(self.buses), "k_crit": self.k_crit, "tol": self.tol, "k_max": self.k_max,
                "stable_throughout": self.stable_throughout,
                "table": [{"gain": k, "abscissa": a} for k, a in self.table]}


def abscissa_at(red: ReducedSystem, gain_vec: np.ndarray, weights: np.ndarray, k: float) -> float:
    return spectral_abscissa(dlaa_matrix(red, sensing_matrix(k * gain_vec, weights)))


def predict_critical_gain(red: ReducedSystem, case: GridCase, buses, k_max: float = 10.0,
                          tol: float = 1e-3, source="coi", n_grid: int = 101,
                          marginal: float = MARGINAL) -> CriticalGainReport:
    """Smallest symmetric gain (pu/Hz) on ``buses`` that destabilizes ``A*``.

    A coarse sweep over ``[0, k_max]`` brackets the first sign change of the
    spectral abscissa, then bisection narrows it to ``tol``.
    """
    unit = np.zeros(case.n_load)
    unit[_targets(case, buses)] = 1.0
    w = sensing_weights(case, source)
    grid = np.linspace(0.0, k_max, n_grid)
    table = [(float(k), abscissa_at(red, unit, w, k)) for k in grid]
    report = CriticalGainReport(tuple(buses), None, tol, k_max, table)
    unstable = [i for i, (_, a) in enumerate(table) if a > marginal]
    if not unstable:
        return report
    i = unstable[0]
    if i == 0:
        report.k_crit = 0.0
        return report
    lo, hi = grid[i - 1], grid[i]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if abscissa_at(red, unit, w, mid) > marginal:
            hi = mid
        else:
            lo = mid
    report.k_crit = float(hi)
    return report
