"""MDLAA configuration: the scenario-level attack description and the resolved numeric config."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..grid.case import GridCase


def pe_bound(n_in: int, T_ini: int, N_ap: int, n: int) -> int:
    """Minimum offline record length for a valid data-driven predictor."""
    return (n_in + 1) * (T_ini + N_ap + n) - 1


@dataclass(frozen=True)
class Excitation:
    """Per-channel multi-sine ``sum_j a_cj sin(2 pi f_cj t + phi_cj)``."""

    freqs: np.ndarray      # (m, K) Hz
    amps: np.ndarray       # (m, K) pu
    phases: np.ndarray     # (m, K) rad

    def sample(self, t: np.ndarray | float) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, float))
        arg = 2 * np.pi * self.freqs[None] * t[:, None, None] + self.phases[None]
        return (self.amps[None] * np.sin(arg)).sum(axis=2)

    @classmethod
    def multisine(cls, p_max: np.ndarray, n_sines: int, sample_period: float, scale: float,
                  seed: int) -> "Excitation":
        """Distinct, incommensurate frequencies for every channel; peak <= scale * p_max."""
        rng = np.random.default_rng(seed)
        m = len(p_max)
        total = m * n_sines
        nyq = 0.5 / sample_period
        lo, hi = 0.05 * nyq, 0.9 * nyq
        grid = np.linspace(lo, hi, total)
        step = (hi - lo) / max(total - 1, 1)
        freqs = grid + rng.uniform(-0.25, 0.25, total) * step
        # interleave so every channel spans the whole band
        freqs = freqs.reshape(n_sines, m).T[rng.permutation(m)]
        phases = rng.uniform(0, 2 * np.pi, (m, n_sines))
        amps = np.repeat((scale * np.asarray(p_max, float) / n_sines)[:, None], n_sines, axis=1)
        return cls(freqs, amps, phases)


@dataclass(frozen=True)
class MdlaaConfig:
    T_a: int
    T_ini: int
    N_ap: int
    N_ac: int
    omega_r: float
    p_max: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    k_max: int
    sample_period: float
    n: int
    excitation: Excitation | None = None
    literal_loop: bool = False
    reg: float = 1e-6

    def __post_init__(self):
        problems = []
        m = len(self.p_max)
        if min(self.T_ini, self.N_ap) < 1:
            problems.append("T_ini and N_ap must be >= 1")
        if not 1 <= self.N_ac <= max(self.N_ap - 1, 1):
            problems.append(f"N_ac={self.N_ac} must lie in [1, N_ap-1]")
        need = pe_bound(m, self.T_ini, self.N_ap, self.n)
        if self.T_a < need:
            problems.append(f"T_a={self.T_a} violates T_a >= (|L|+1)(T_ini+N_ap+n)-1 = "
                            f"({m}+1)({self.T_ini}+{self.N_ap}+{self.n})-1 = {need}")
        if np.any(~np.isfinite(self.p_max)) or np.any(self.p_max < 0):
            problems.append("p_max must be finite and >= 0")
        for name, W, size in (("Q", self.Q, None), ("R", self.R, m)):
            W = np.asarray(W)
            if W.ndim != 2 or W.shape[0] != W.shape[1] or (size is not None and W.shape[0] != size):
                problems.append(f"{name} has shape {W.shape}")
            elif not np.allclose(W, W.T) or np.linalg.eigvalsh(W).min() < -1e-12:
                problems.append(f"{name} must be symmetric positive semidefinite")
        if self.k_max < 1 or not self.sample_period > 0:
            problems.append("k_max must be >= 1 and sample_period > 0")
        if not math.isfinite(self.omega_r):
            problems.append("omega_r must be finite")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def n_in(self) -> int:
        return len(self.p_max)

    @property
    def n_out(self) -> int:
        return self.Q.shape[0]

    @property
    def order(self) -> int:
        return self.T_ini + self.N_ap + self.n


@dataclass(frozen=True)
class MdlaaSpec:
    """Scenario-level description of a measurement-based attack.

    ``budget`` is the aggregate attack resource as a fraction of system load;
    it is spread over the targets in proportion to their load and capped by
    each bus's vulnerable share. Empty ``buses`` means every loaded bus;
    ``sensors`` empty means every generator bus.
    """

    buses: tuple[int, ...] = ()
    budget: float = 0.3
    start: float = 30.0
    T_ini: int = 4
    N_ap: int = 10
    N_ac: int = 2
    omega_r: float = -1.5
    q: float = 1.0
    rho: float = 1e-3
    k_max: int = 600
    sample_period: float = 0.1
    excitation_scale: float = 0.5
    n_sines: int | None = None
    T_a: int | None = None
    order: int | None = None
    sensors: tuple[int, ...] = ()
    literal_loop: bool = False
    seed: int = 0
    replay_offline: str | None = None
    reg: float = 1e-6

    kind = "mdlaa"

    def __post_init__(self):
        if not self.budget >= 0 or self.start < 0 or self.excitation_scale < 0:
            raise ConfigError("MDLAA budget, start and excitation scale must be >= 0")
        if self.q < 0 or self.rho < 0:
            raise ConfigError("MDLAA weights must be >= 0")

    _FIELDS = ("budget", "T_ini", "N_ap", "N_ac", "omega_r", "q", "rho", "k_max", "sample_period",
               "excitation_scale", "n_sines", "T_a", "order", "literal_loop", "seed", "replay_offline",
               "reg")

    @classmethod
    def from_dict(cls, d: dict) -> "MdlaaSpec":
        d = dict(d)
        kw = {}
        for key in ("buses", "sensors"):
            if key in d:
                kw[key] = tuple(int(b) for b in d.pop(key))
        if "start_s" in d:
            kw["start"] = float(d.pop("start_s"))
        if "sample_period_s" in d:
            d["sample_period"] = d.pop("sample_period_s")
        unknown = set(d) - set(cls._FIELDS)
        if unknown:
            raise ConfigError(f"unknown MDLAA keys: {sorted(unknown)}")
        kw.update(d)
        return cls(**kw)

    def to_dict(self) -> dict:
        d = {"type": "mdlaa", "buses": list(self.buses), "sensors": list(self.sensors),
             "start_s": self.start, "sample_period_s": self.sample_period}
        for key in self._FIELDS:
            if key != "sample_period":
                d[key] = getattr(self, key)
        return d

    def targets(self, case: GridCase) -> tuple[int, ...]:
        if self.buses:
            bad = [b for b in self.buses if b not in case.load_index]
            if bad:
                raise ConfigError(f"MDLAA targets {bad} are not load buses")
            return self.buses
        return tuple(b for b, p in zip(case.load_buses, case.nominal_load) if p > 0)

    def sensor_buses(self, case: GridCase) -> tuple[int, ...]:
        if self.sensors:
            bad = [b for b in self.sensors if b not in case.gen_index]
            if bad:
                raise ConfigError(f"MDLAA sensors {bad} are not generator buses")
            return self.sensors
        return tuple(case.gen_buses)

    def p_max(self, case: GridCase) -> np.ndarray:
        idx = [case.load_index[b] for b in self.targets(case)]
        load = case.nominal_load[idx]
        return np.minimum(self.budget * load, case.vulnerable_fraction[idx] * load)

    def resolve(self, case: GridCase, n_default: int) -> MdlaaConfig:
        p_max = self.p_max(case)
        m = len(p_max)
        s = len(self.sensor_buses(case))
        n = self.order if self.order is not None else n_default
        L = self.T_ini + self.N_ap + n
        T_a = self.T_a if self.T_a is not None else int(math.ceil(1.2 * pe_bound(m, self.T_ini, self.N_ap, n)))
        n_sines = self.n_sines if self.n_sines is not None else L // 2 + 1
        exc = Excitation.multisine(p_max, n_sines, self.sample_period, self.excitation_scale, self.seed)
        return MdlaaConfig(T_a=T_a, T_ini=self.T_ini, N_ap=self.N_ap, N_ac=self.N_ac,
                           omega_r=self.omega_r, p_max=p_max, Q=self.q * np.eye(s),
                           R=self.rho * np.eye(m), k_max=self.k_max, sample_period=self.sample_period,
                           n=n, excitation=exc, literal_loop=self.literal_loop, reg=self.reg)
