"""Under-frequency load shedding and grid-code frequency compliance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid.integrate import SimState

# (threshold Hz, shed fraction of initial total load)
DEFAULT_UFLS_STAGES = ((59.5, 0.07), (59.3, 0.07), (59.1, 0.07), (58.9, 0.07))

THIRTY_MIN = 1800.0
THIRTY_S = 30.0


@dataclass(frozen=True)
class UflsConfig:
    stages: tuple[tuple[float, float], ...] = DEFAULT_UFLS_STAGES
    enabled: bool = True
    source: str = "coi"          # "coi" (inertia-weighted) or "min_gen" (most depressed generator)

    def __post_init__(self):
        th = [s[0] for s in self.stages]
        if any(a <= b for a, b in zip(th, th[1:])):
            raise ConfigError("UFLS thresholds must be strictly decreasing")
        if any(not 0.0 < s[1] < 1.0 for s in self.stages):
            raise ConfigError("UFLS shed fractions must lie in (0, 1)")
        if sum(s[1] for s in self.stages) > 1.0:
            raise ConfigError("UFLS stages shed more than the whole load")
        if self.source not in ("coi", "min_gen"):
            raise ConfigError(f"unknown UFLS measurement source {self.source!r}")

    @classmethod
    def from_dict(cls, d: dict | None) -> "UflsConfig":
        d = dict(d or {})
        unknown = set(d) - {"enabled", "stages", "source"}
        if unknown:
            raise ConfigError(f"unknown UFLS keys: {sorted(unknown)}")
        stages = d.get("stages")
        if stages is not None:
            stages = tuple((float(s["threshold_hz"]), float(s["fraction"])) for s in stages)
        return cls(stages=stages or DEFAULT_UFLS_STAGES, enabled=bool(d.get("enabled", True)),
                   source=d.get("source", "coi"))

    def to_dict(self) -> dict:
        return {"enabled": self.enabled, "source": self.source,
                "stages": [{"threshold_hz": t, "fraction": f} for t, f in self.stages]}


@dataclass
class UflsRelay:
    cfg: UflsConfig = field(default_factory=UflsConfig)
    latched: list[bool] = field(default=None)
    trips: list[tuple[int, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.latched is None:
            self.latched = [False] * len(self.cfg.stages)

    @property
    def cumulative_fraction(self) -> float:
        return sum(f for (_, f), on in zip(self.cfg.stages, self.latched) if on)


@dataclass(frozen=True)
class ShedCommand:
    stages: tuple[int, ...]
    fraction: float
    time: float


def ufls_evaluate(relay: UflsRelay, freq_hz: float, time: float) -> ShedCommand | None:
    """Latch every not-yet-tripped stage whose threshold ``freq_hz`` has reached."""
    if not math.isfinite(freq_hz):
        return None
    tripped = []
    for i, (threshold, _) in enumerate(relay.cfg.stages):
        if not relay.latched[i] and freq_hz <= threshold:
            relay.latched[i] = True
            relay.trips.append((i, time))
            tripped.append(i)
    if not tripped:
        return None
    return ShedCommand(tuple(tripped), sum(relay.cfg.stages[i][1] for i in tripped), time)


def apply_shed(state: SimState, command: ShedCommand, events: list | None = None) -> SimState:
    """Disconnect ``command.fraction`` of the initial total load, pro rata by bus.

    Sheds are permanent; the vulnerable (attack) load on a bus is disconnected
    together with the rest of that bus.
    """
    new = state.copy()
    initial = state.nominal
    total = float(initial.sum())
    remaining = float(state.load.sum())
    if total <= 0 or remaining <= 1e-12:
        if events is not None:
            events.append({"kind": "shed_ignored", "time": command.time, "stages": list(command.stages)})
        return new
    cut = command.fraction * initial
    new.load = np.maximum(state.load - cut, 0.0)
    return new


@dataclass(frozen=True)
class Band:
    name: str
    low: float
    high: float
    max_dwell: float          # s; math.inf means unlimited
    closed: str = "both"      # which ends belong to the band: both | low | high

    def contains(self, f: float) -> bool:
        lo_ok = f >= self.low if self.closed in ("both", "low") else f > self.low
        hi_ok = f <= self.high if self.closed in ("both", "high") else f < self.high
        return lo_ok and hi_ok


def default_bands(dwell_30min: float = THIRTY_MIN, dwell_30s: float = THIRTY_S) -> tuple[Band, ...]:
    """Grid-code bands. The 0.1 Hz gaps between tabulated ranges (58.7-58.8,
    57.4-57.5, 60.5-60.6, 61.5-61.6) belong to the adjacent stricter band."""
    return (
        Band("continuous", 58.8, 60.5, math.inf),
        Band("under_30min", 57.5, 58.8, dwell_30min, closed="low"),
        Band("over_30min", 60.5, 61.5, dwell_30min, closed="high"),
        Band("under_30s", 57.0, 57.5, dwell_30s, closed="low"),
        Band("over_30s", 61.5, 62.5, dwell_30s, closed="high"),
    )


def classify(freq_hz: float, bands) -> Band | None:
    """Band containing ``freq_hz``; None means outside the operating range."""
    for band in bands:
        if band.contains(freq_hz):
            return band
    return None


@dataclass
class GridCodeMonitor:
    bands: tuple[Band, ...] = field(default_factory=default_bands)
    timers: dict[str, float] = field(default_factory=dict)
    time: float = 0.0
    violation: tuple[float, str] | None = None

    @property
    def compliant(self) -> bool:
        return self.violation is None

    @property
    def verdict(self) -> str:
        return "compliant" if self.violation is None else "violated"


def gridcode_step(mon: GridCodeMonitor, freq_hz: float, dt: float) -> str:
    """Account ``dt`` seconds spent at ``freq_hz``; returns the verdict so far."""
    if not dt > 0:
        raise ConfigError("dt must be > 0")
    mon.time += dt
    if mon.violation is not None:
        return mon.verdict
    band = classify(freq_hz, mon.bands) if math.isfinite(freq_hz) else None
    for name in list(mon.timers):
        if band is None or name != band.name:
            del mon.timers[name]
    if band is None:
        mon.violation = (mon.time, "outside")
    elif band.max_dwell != math.inf:
        dwell = mon.timers.get(band.name, 0.0) + dt
        mon.timers[band.name] = dwell
        if dwell > band.max_dwell + 1e-9:
            mon.violation = (mon.time, band.name)
    return mon.verdict
