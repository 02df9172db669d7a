"""The MDLAA attacker: offline data collection followed by the receding-horizon loop."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, ExcitationError, InputFileError
from .config import MdlaaConfig
from .hankel import HankelBlocks, check_persistent_excitation
from .qp import AttackQP, PredictorSolution


@dataclass
class OfflineRecord:
    p: np.ndarray      # (T_a, m) applied attack samples
    omega: np.ndarray  # (T_a, s) sensed frequency deviations, Hz

    def write_csv(self, fh) -> None:
        m, s = self.p.shape[1], self.omega.shape[1]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k"] + [f"p{i}" for i in range(m)] + [f"w{i}" for i in range(s)])
        for k, (p, o) in enumerate(zip(self.p, self.omega)):
            w.writerow([k] + [repr(float(v)) for v in p] + [repr(float(v)) for v in o])

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            self.write_csv(fh)

    @classmethod
    def load_csv(cls, path: str | Path) -> "OfflineRecord":
        try:
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
        except OSError as exc:
            raise InputFileError(f"{path}: cannot read offline record ({exc.strerror})") from exc
        header, body = rows[0], rows[1:]
        pi = [i for i, h in enumerate(header) if h.startswith("p")]
        wi = [i for i, h in enumerate(header) if h.startswith("w")]
        data = np.array([[float(x) for x in r] for r in body])
        return cls(data[:, pi], data[:, wi])


def check_record(record: OfflineRecord, cfg: MdlaaConfig) -> None:
    if len(record.p) < cfg.T_a:
        raise ConfigError(f"offline record has {len(record.p)} samples, T_a={cfg.T_a} required")
    chk = check_persistent_excitation(record.p, cfg.order)
    if not chk.persistently_exciting:
        raise ExcitationError(
            f"offline attack signal is not persistently exciting of order {cfg.order} "
            f"(Hankel rank {chk.rank} < {chk.rows}); use more sinusoids or a larger amplitude")


@dataclass
class MdlaaAgent:
    """Sample-driven attacker. Call :meth:`on_sample` once per sample period
    with the sensed frequency deviations; it returns the attack to hold until
    the next sample.

    ``scale`` (per channel, default 1) lets the host reduce what is actually
    applied, e.g. after load shedding; the record always keeps the applied
    values so ini windows hold true samples.
    """

    cfg: MdlaaConfig
    record: OfflineRecord | None = None
    phase: str = "offline"
    k: int = 0                   # samples since the attack began
    k_online: int = 0
    p_hist: list = field(default_factory=list)
    w_hist: list = field(default_factory=list)
    plan: np.ndarray | None = None
    plan_pos: int = 0
    qp: AttackQP | None = None
    solutions: list[PredictorSolution] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    status: str = "running"

    def __post_init__(self):
        if self.record is not None:
            check_record(self.record, self.cfg)
            self.p_hist = list(self.record.p)
            self.w_hist = list(self.record.omega)
            self._build()

    @property
    def applied_count(self) -> int:
        return self.k_online

    def _build(self) -> None:
        cfg = self.cfg
        P = np.asarray(self.p_hist[:cfg.T_a] if self.record is None else self.p_hist, float)
        W = np.asarray(self.w_hist[:len(P)], float)
        if self.record is None:
            self.record = OfflineRecord(P, W)
            check_record(self.record, cfg)
        blocks = HankelBlocks.from_data(P, W, cfg.T_ini, cfg.N_ap)
        self.qp = AttackQP(blocks, cfg.Q, cfg.R, cfg.omega_r, cfg.p_max, cfg.reg)
        self.phase = "online"
        self.events.append({"kind": "mdlaa_online", "sample": self.k, "columns": blocks.columns})

    def _target_reached(self, w: np.ndarray) -> bool:
        mean = float(np.mean(w))
        return mean <= self.cfg.omega_r if self.cfg.omega_r < 0 else mean >= self.cfg.omega_r

    def _keep_going(self, w: np.ndarray) -> bool:
        more = self.k_online < self.cfg.k_max
        reached = self._target_reached(w)
        if self.cfg.literal_loop:
            return more or reached
        return more and not reached

    def on_sample(self, w: np.ndarray, scale: np.ndarray | None = None) -> np.ndarray:
        cfg = self.cfg
        w = np.asarray(w, float)
        m = cfg.n_in
        scale = np.ones(m) if scale is None else np.asarray(scale, float)
        if self.phase == "offline":
            p = cfg.excitation.sample(self.k * cfg.sample_period)[0] if cfg.excitation is not None \
                else np.zeros(m)
        elif self.phase == "online":
            if self.plan is None or self.plan_pos >= cfg.N_ac:
                if not self._keep_going(w):
                    self.phase = "done"
                    self.status = "target_reached" if self._target_reached(w) else "exhausted"
                    self.events.append({"kind": "mdlaa_done", "sample": self.k, "status": self.status})
                    return self._finish(w, np.zeros(m))
                T = cfg.T_ini
                p_ini = np.asarray(self.p_hist[-T:])
                w_ini = np.asarray(self.w_hist[-T:])
                warm = None
                if self.plan is not None:
                    warm = np.vstack([self.plan[cfg.N_ac:], np.repeat(self.plan[-1:], cfg.N_ac, axis=0)])
                sol = self.qp.solve(p_ini, w_ini, warm=warm)
                if sol.relaxed:
                    self.events.append({"kind": "mdlaa_ini_relaxed", "sample": self.k,
                                        "residual": sol.eq_residual})
                self.solutions.append(sol)
                self.plan = sol.p_f
                self.plan_pos = 0
            p = self.plan[self.plan_pos]
            self.plan_pos += 1
            self.k_online += 1
        else:
            p = np.zeros(m)
        p = np.clip(p, -cfg.p_max, cfg.p_max) * scale
        return self._finish(w, p)

    def _finish(self, w: np.ndarray, p: np.ndarray) -> np.ndarray:
        self.p_hist.append(p.copy())
        self.w_hist.append(w.copy())
        self.k += 1
        if self.phase == "offline" and self.k >= self.cfg.T_a:
            self._build()
        return p


class PlantHandle:
    """Open-loop reduced model driven directly by the attacker (no network).

    ``targets`` are load-vector indices and ``sensors`` generator indices.
    """

    def __init__(self, red, targets, sensors, dt: float = 0.01):
        from ..grid.integrate import Stepper

        self.red = red
        self.targets = np.asarray(targets, int)
        self.sensors = np.asarray(sensors, int)
        self.stepper = Stepper(red, dt)
        self.dt = dt
        self.x = np.zeros(red.n_state)
        self.u = np.zeros(red.n_load)
        self.time = 0.0

    def measure(self) -> np.ndarray:
        return self.x[self.red.omega_slice][self.sensors].copy()

    def apply(self, p: np.ndarray) -> None:
        self.u = np.zeros(self.red.n_load)
        self.u[self.targets] = p

    def advance(self, duration: float) -> None:
        n = int(round(duration / self.dt))
        sp = np.zeros(self.red.n_gen)
        for _ in range(n):
            self.x = self.stepper.advance(self.x, self.u, sp)
            self.time += self.dt


def collect_offline(handle: PlantHandle, cfg: MdlaaConfig) -> OfflineRecord:
    agent = MdlaaAgent(cfg)
    while agent.phase == "offline":
        handle.apply(agent.on_sample(handle.measure()))
        handle.advance(cfg.sample_period)
    return agent.record


@dataclass
class MdlaaTrace:
    time: np.ndarray
    p: np.ndarray
    omega: np.ndarray
    outcome: str
    violation_time: float | None
    agent: MdlaaAgent


def run_mdlaa(handle: PlantHandle, cfg: MdlaaConfig, record: OfflineRecord | None = None,
              limit_hz: float = 3.0, divergence_hz: float = 20.0) -> MdlaaTrace:
    """Run the attack on a bare plant until the agent stops.

    The outcome is ``destabilized`` once any sensed deviation leaves
    ``limit_hz`` and ``failed`` when the loop ends without that.
    """
    agent = MdlaaAgent(cfg, record=record)
    ts, ps, ws = [], [], []
    violation = None
    while agent.phase != "done":
        w = handle.measure()
        ts.append(handle.time)
        ws.append(w)
        if violation is None and np.max(np.abs(w), initial=0.0) > limit_hz:
            violation = handle.time
        if not np.all(np.isfinite(w)) or np.max(np.abs(w), initial=0.0) > divergence_hz:
            break
        p = agent.on_sample(w)
        ps.append(p)
        handle.apply(p)
        handle.advance(cfg.sample_period)
    ps += [np.zeros(cfg.n_in)] * (len(ts) - len(ps))
    outcome = "destabilized" if violation is not None else "failed"
    return MdlaaTrace(np.array(ts), np.array(ps), np.array(ws), outcome, violation, agent)


def offline_signal_ok(cfg: MdlaaConfig) -> bool:
    """Cheap pre-flight PE check of the configured excitation alone."""
    if cfg.excitation is None:
        return False
    t = np.arange(cfg.T_a) * cfg.sample_period
    return check_persistent_excitation(cfg.excitation.sample(t), cfg.order).persistently_exciting

