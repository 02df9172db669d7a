"""Per-area secondary frequency control (LFC) driven by networked measurements."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ParameterError
from .grid.case import GridCase
from .grid.integrate import SimState

ACC_LIMIT = 25.0   # pu*s, anti-windup clamp


@dataclass(frozen=True)
class Measurement:
    source: str           # area id as string, or "system"
    freq_dev: float       # Hz
    tie_dev: float        # pu, net export deviation of the area
    timestamp: float
    seq: int


@dataclass(frozen=True)
class ControllerConfig:
    enabled: bool = True
    gain_Ks: float = 0.3
    bias_beta: float | None = None      # pu/Hz, None -> area frequency response
    period_ms: float = 100.0
    staleness_s: float = 5.0
    acc_limit: float = ACC_LIMIT        # pu*s

    @classmethod
    def from_dict(cls, d: dict | None) -> "ControllerConfig":
        d = dict(d or {})
        unknown = set(d) - {"enabled", "gain_Ks", "bias_beta", "period_ms", "staleness_s", "acc_limit"}
        if unknown:
            raise ConfigError(f"unknown controller keys: {sorted(unknown)}")
        cfg = cls(**d)
        if cfg.gain_Ks < 0 or cfg.period_ms <= 0 or cfg.staleness_s <= 0 or not cfg.acc_limit > 0:
            raise ConfigError("controller gain must be >= 0; period, staleness and acc_limit > 0")
        return cfg

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def default_bias(case: GridCase, area: int) -> float:
    """Frequency bias: sum of droop gain plus damping over the area's generators."""
    return float(sum(case.generators[i].R + case.generators[i].D for i in case.area_gens(area)))


@dataclass
class AreaControllerState:
    area: int
    gens: list[int]
    alpha: np.ndarray
    gain_Ks: float
    beta: float
    staleness_s: float = 5.0
    period_s: float = 0.1
    acc_limit: float = ACC_LIMIT
    acc: float = 0.0
    last_seq: int = -1
    last_timestamp: float = -math.inf
    last_used: float | None = None
    output: np.ndarray = field(default=None)
    pending: Measurement | None = None
    stale: bool = False

    def __post_init__(self):
        if self.output is None:
            self.output = np.zeros(len(self.gens))

    @classmethod
    def for_area(cls, case: GridCase, area: int, cfg: ControllerConfig) -> "AreaControllerState":
        gens = [i for i in case.area_gens(area) if case.generators[i].alpha > 0]
        alpha = np.array([case.generators[i].alpha for i in gens])
        beta = default_bias(case, area) if cfg.bias_beta is None else cfg.bias_beta
        return cls(area, gens, alpha, cfg.gain_Ks, beta, cfg.staleness_s, cfg.period_ms / 1000.0,
                   cfg.acc_limit)


def compute_ace(measurement: Measurement, beta: float) -> float:
    return measurement.tie_dev + beta * measurement.freq_dev


def lfc_step(ctrl: AreaControllerState, ace: float, dt: float, events: list | None = None) -> np.ndarray:
    """Integrate the ACE and return per-generator setpoint deviations."""
    if not dt > 0:
        raise ParameterError("dt must be > 0")
    acc = ctrl.acc + ace * dt
    if abs(acc) > ctrl.acc_limit:
        acc = math.copysign(ctrl.acc_limit, acc)
        if events is not None:
            events.append({"kind": "clamp", "area": ctrl.area, "acc": acc})
    ctrl.acc = acc
    ctrl.output = -ctrl.gain_Ks * ctrl.acc * ctrl.alpha
    return ctrl.output.copy()


def receive(ctrl: AreaControllerState, m: Measurement) -> bool:
    """Queue a measurement for the next tick; out-of-order frames are discarded."""
    if m.seq <= ctrl.last_seq:
        return False
    ctrl.last_seq = m.seq
    ctrl.last_timestamp = m.timestamp
    ctrl.pending = m
    ctrl.stale = False
    return True


def tick(ctrl: AreaControllerState, now: float, events: list) -> np.ndarray | None:
    """Run one controller period; returns new setpoints, or None to hold."""
    m = ctrl.pending
    if m is None:
        if now - ctrl.last_timestamp > ctrl.staleness_s and not ctrl.stale:
            ctrl.stale = True
            events.append({"kind": "stale", "area": ctrl.area, "time": now})
        return None
    ctrl.pending = None
    if now - m.timestamp > ctrl.staleness_s:
        events.append({"kind": "stale", "area": ctrl.area, "time": now})
        return None
    dt = m.timestamp - ctrl.last_used if ctrl.last_used is not None else ctrl.period_s
    ctrl.last_used = m.timestamp
    if dt <= 0:
        return ctrl.output.copy()
    return lfc_step(ctrl, compute_ace(m, ctrl.beta), min(dt, ctrl.staleness_s), events)


def apply_setpoints(state: SimState, deltas: dict[int, float], case: GridCase) -> SimState:
    """Set generator setpoint deviations; only LFC participants may be dispatched."""
    new = state.copy()
    for gen, value in deltas.items():
        if not math.isfinite(value):
            raise ParameterError(f"non-finite setpoint for generator {gen}")
        if case.generators[gen].alpha <= 0:
            raise ParameterError(
                f"generator at bus {case.generators[gen].bus} does not participate in LFC")
        new.setpoints[gen] = value
    return new
