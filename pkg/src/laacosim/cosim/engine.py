"""Lockstep co-simulation of plant, channels, controllers, protection and attacker.

Every grid step at logical time ``t = k * dt`` runs, in this fixed order:

1. the plant publishes measurement frames that are due at ``t``;
2. plant->controller and plant->attacker channels are polled; the LFC
   controllers queue measurements and the UFLS relay evaluates them, sending
   shed commands back over the controller->plant channel;
3. LFC controllers tick on their period and send setpoint commands;
4. the controller->plant channel is polled and commands enter the plant inputs;
5. the attacker computes its injection;
6. the grid advances by ``dt`` and the grid-code monitor accounts the step.

Frames due at the same instant are delivered in (delivery time, sequence)
order, so the outcome never depends on dictionary or agent iteration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..attacks import DlaaSpec, SlaaSpec, dlaa_inject, slaa_inject
from ..controllers import AreaControllerState, Measurement, receive, tick
from ..errors import ConfigError
from ..grid import GridCase, SimState, Stepper, load_case, reduced_model
from ..grid.integrate import rk4
from ..mdlaa.agent import MdlaaAgent, OfflineRecord
from ..mdlaa.config import MdlaaSpec
from ..netem import Channel, Frame
from ..protection import GridCodeMonitor, UflsRelay, apply_shed, default_bands, gridcode_step, ufls_evaluate
from .scenario import LINK_NAMES, Scenario

OUTCOMES = ("stable", "off-nominal-stable", "destabilized", "failed")


@dataclass
class ScenarioResult:
    scenario: Scenario
    gen_buses: tuple[int, ...]
    time: np.ndarray
    f_coi: np.ndarray          # Hz, absolute
    f_gen: np.ndarray          # (T, G) Hz, absolute
    load: np.ndarray           # connected secure load, pu
    attack: np.ndarray         # total injected attack load, pu
    lfc: np.ndarray            # total LFC setpoint, pu
    shed: np.ndarray           # cumulative shed fraction of initial load
    events: list[dict]
    outcome: str
    violation: tuple[float, str] | None
    metrics: dict = field(default_factory=dict)
    channel_stats: dict = field(default_factory=dict)

    @property
    def violation_time(self) -> float | None:
        return None if self.violation is None else self.violation[0]

    @property
    def verdict(self) -> str:
        return "compliant" if self.violation is None else "violated"

    def outcome_label(self) -> str:
        if self.outcome == "destabilized":
            return f"destabilized({self.violation_time:.2f})"
        return self.outcome


def _tie_matrix(case: GridCase) -> tuple[np.ndarray, np.ndarray]:
    """Rows map (delta, theta) to each area's net export deviation."""
    Td = np.zeros((len(case.area_ids), case.n_gen))
    Tt = np.zeros((len(case.area_ids), case.n_load))

    def add(row, bus, v):
        if bus in case.gen_index:
            Td[row, case.gen_index[bus]] += v
        else:
            Tt[row, case.load_index[bus]] += v

    for row, area in enumerate(case.area_ids):
        for inside, outside, b in case.tie_lines(area):
            add(row, inside, b)
            add(row, outside, -b)
    return Td, Tt


def _area_weights(case: GridCase) -> np.ndarray:
    W = np.zeros((len(case.area_ids), case.n_gen))
    M = case.gen_vector("M")
    for row, area in enumerate(case.area_ids):
        idx = case.area_gens(area)
        if idx:
            W[row, idx] = M[idx] / M[idx].sum()
    return W


class Engine:
    def __init__(self, scenario: Scenario, case: GridCase | None = None, offline: OfflineRecord | None = None):
        self.sc = scenario
        base = case if case is not None else load_case(scenario.case)
        # secondary action comes only from the networked controllers
        self.case = base.with_generators(KI=0.0)
        self.red = reduced_model(self.case)
        self.dt = scenario.dt
        self.stepper = Stepper(self.red, self.dt)
        self.state = SimState.initial(self.red, self.case.nominal_load)
        self.coi = self.case.coi_weights
        self.area_w = _area_weights(self.case)
        self.Td, self.Tt = _tie_matrix(self.case)
        self.channels = {name: Channel(scenario.links[name], name) for name in LINK_NAMES}
        self.events: list[dict] = []
        self.monitor = GridCodeMonitor(default_bands(scenario.gridcode.dwell_30min_s,
                                                     scenario.gridcode.dwell_30s_s))
        self.controllers: list[AreaControllerState] = []
        if scenario.lfc.enabled:
            for area in self.case.area_ids:
                ctrl = AreaControllerState.for_area(self.case, area, scenario.lfc)
                if ctrl.gens:
                    self.controllers.append(ctrl)
        self.relay = UflsRelay(scenario.ufls) if scenario.ufls.enabled else None
        self.attack = scenario.attack
        self.agent: MdlaaAgent | None = None
        self._attacker_w: np.ndarray | None = None
        self._last_eps = np.zeros(self.case.n_load)
        self._setup_attack(offline)

    # -- setup -------------------------------------------------------------
    def _steps(self, period: float, what: str) -> int:
        n = period / self.dt
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ConfigError(f"{what} ({period}) must be a whole multiple of dt ({self.dt})")
        return int(round(n))

    def _setup_attack(self, offline):
        a = self.attack
        self.continuous = False
        self.attacker_steps = None
        if isinstance(a, DlaaSpec):
            link = self.sc.links["plant_to_attacker"]
            ideal = link.delay == 0 and link.jitter == 0 and link.loss == 0
            self.continuous = ideal and a.period is None
            self.attacker_steps = 1 if a.period is None else self._steps(a.period, "DLAA period")
            self.dlaa_w = a.weights(self.case)
            self.dlaa_k = a.gain_vector(self.case)
        elif isinstance(a, MdlaaSpec):
            cfg = a.resolve(self.case, self.red.n_state)
            record = offline
            if record is None and a.replay_offline:
                record = OfflineRecord.load_csv(a.replay_offline)
            self.mdlaa_cfg = cfg
            self.mdlaa_targets = np.array([self.case.load_index[b] for b in a.targets(self.case)])
            self.mdlaa_sensors = np.array([self.case.gen_index[b] for b in a.sensor_buses(self.case)])
            self.agent = MdlaaAgent(cfg, record=record)
            self.attacker_steps = self._steps(cfg.sample_period, "MDLAA sample period")
        elif isinstance(a, SlaaSpec):
            slaa_inject(a, a.start, self.case.nominal_load, self.case)  # validates targets
        self.start_step = None if a is None else int(math.ceil(a.start / self.dt - 1e-9))

    # -- helpers -------------------------------------------------------------
    def connected(self) -> np.ndarray:
        nom = self.state.nominal
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(nom > 0, self.state.load / np.where(nom > 0, nom, 1.0), 0.0)
        return c

    def _theta(self) -> np.ndarray:
        return self.red.theta(self.state.delta, self.state.load_dev)

    def _publish(self, t: float, k: int):
        s = self.state
        if k % self.meas_steps == 0:
            f_area = self.area_w @ s.omega
            tie = self.Td @ s.delta + self.Tt @ self._theta()
            payload = {"areas": {int(a): (float(f_area[i]), float(tie[i]))
                                 for i, a in enumerate(self.case.area_ids)},
                       "f_sys": float(self.coi @ s.omega), "f_min": float(s.omega.min())}
            self.channels["plant_to_ctrl"].send(Frame("measurement", "plant", "control", payload, t))
        if self.attacker_steps is not None and not self.continuous and k % self.attacker_steps == 0:
            payload = {"omega": s.omega.copy(), "f_sys": float(self.coi @ s.omega)}
            self.channels["plant_to_attacker"].send(Frame("measurement", "plant", "attacker", payload, t))

    def _consume_control(self, t: float):
        for frame in self.channels["plant_to_ctrl"].poll(t):
            p = frame.payload
            for ctrl in self.controllers:
                f, tie = p["areas"][ctrl.area]
                receive(ctrl, Measurement(str(ctrl.area), f, tie, frame.send_time, frame.seq))
            if self.relay is not None:
                f = p["f_sys"] if self.relay.cfg.source == "coi" else p["f_min"]
                cmd = ufls_evaluate(self.relay, self.case.nominal_hz + f, t)
                if cmd is not None:
                    self.events.append({"kind": "ufls_trip", "time": t, "stages": [i + 1 for i in cmd.stages],
                                        "fraction": cmd.fraction, "measured_at": frame.send_time})
                    self.channels["ctrl_to_plant"].send(
                        Frame("command", "control", "plant", {"shed": cmd}, t))

    def _tick_controllers(self, t: float, k: int):
        if not self.controllers or k % self.lfc_steps:
            return
        for ctrl in self.controllers:
            out = tick(ctrl, t, self.events)
            if out is not None:
                cmd = {int(g): float(v) for g, v in zip(ctrl.gens, out)}
                self.channels["ctrl_to_plant"].send(Frame("command", f"lfc{ctrl.area}", "plant",
                                                          {"setpoints": cmd}, t))

    def _apply_commands(self, t: float):
        for frame in self.channels["ctrl_to_plant"].poll(t):
            p = frame.payload
            if "setpoints" in p:
                for g, v in p["setpoints"].items():
                    self.state.setpoints[g] = v
            if "shed" in p:
                before = self.state.load.sum()
                self.state = apply_shed(self.state, p["shed"], self.events)
                self.events.append({"kind": "shed_applied", "time": t,
                                    "pu": float(before - self.state.load.sum())})

    def _attacker_inputs(self, t: float, k: int):
        a = self.attack
        frames = self.channels["plant_to_attacker"].poll(t)
        if frames:
            self._attacker_w = frames[-1].payload
        if a is None or k < self.start_step:
            self.state.attack = np.zeros(self.case.n_load)
            return
        if k == self.start_step:
            self.events.append({"kind": "attack_start", "time": t, "type": a.kind})
        conn = self.connected()
        if isinstance(a, SlaaSpec):
            self.state.attack = slaa_inject(a, t, self.case.nominal_load, self.case) * conn
        elif isinstance(a, DlaaSpec):
            if self.continuous or (k - self.start_step) % self.attacker_steps:
                return
            dw = None if self._attacker_w is None else self._sensed(self._attacker_w["omega"])
            eps = dlaa_inject(a, dw, t, self.case, conn, self._last_eps)
            self._last_eps = eps
            self.state.attack = eps
        elif isinstance(a, MdlaaSpec):
            if (k - self.start_step) % self.attacker_steps:
                return
            agent = self.agent
            phase = agent.phase
            w = np.zeros(len(self.mdlaa_sensors)) if self._attacker_w is None \
                else self._attacker_w["omega"][self.mdlaa_sensors]
            n_events = len(agent.events)
            p = agent.on_sample(w, scale=conn[self.mdlaa_targets])
            for ev in agent.events[n_events:]:
                self.events.append({**ev, "time": t})
            if phase == "offline" and k == self.start_step:
                self.events.append({"kind": "mdlaa_offline", "time": t, "samples": self.mdlaa_cfg.T_a})
            eps = np.zeros(self.case.n_load)
            eps[self.mdlaa_targets] = p
            self.state.attack = eps

    def _sensed(self, omega: np.ndarray) -> float:
        return float(self.dlaa_w @ omega)

    def _grid_step(self):
        s = self.state
        if self.continuous and self.attack is not None and s.time + 1e-12 >= self.attack.start:
            a = self.attack
            conn = self.connected()
            base = s.load - s.nominal
            k_eff = self.dlaa_k * conn
            cap = self.case.vulnerable_fraction * self.case.nominal_load * conn
            kick = np.zeros(self.case.n_load)
            if a.kick:
                mask = self.dlaa_k > 0
                kick[mask] = a.kick * (self.case.nominal_load * conn)[mask]
            g = self.red.n_gen
            sp = self.red.B_gen @ s.setpoints
            A, B, w = self.red.A, self.red.B, self.dlaa_w

            def eps_of(x):
                return np.clip(-k_eff * (w @ x[g:2 * g]) + kick, -cap, cap)

            x = rk4(lambda x: A @ x + B @ (base + eps_of(x)) + sp, s.x, self.dt)
            s.attack = eps_of(x)
        else:
            x = self.stepper.advance(s.x, s.load_dev, s.setpoints)
        s.set_x(x)
        s.time += self.dt

    # -- main loop ---------------------------------------------------------
    def run(self) -> ScenarioResult:
        sc = self.sc
        self.meas_steps = self._steps(sc.measurement_period, "measurement period")
        self.lfc_steps = self._steps(sc.lfc.period_ms / 1000.0, "LFC period")
        n = int(round(sc.duration / self.dt))
        f0 = self.case.nominal_hz
        rec = {key: [] for key in ("t", "coi", "gen", "load", "attack", "lfc", "shed")}
        total0 = float(self.state.nominal.sum())

        def record():
            s = self.state
            rec["t"].append(s.time)
            rec["coi"].append(f0 + float(self.coi @ s.omega))
            rec["gen"].append(f0 + s.omega)
            rec["load"].append(float(s.load.sum()))
            rec["attack"].append(float(s.attack.sum()))
            rec["lfc"].append(float(s.setpoints.sum()))
            rec["shed"].append(0.0 if total0 == 0 else 1.0 - float(s.load.sum()) / total0)

        record()
        stopped = None
        for k in range(n):
            t = k * self.dt
            self._publish(t, k)
            self._consume_control(t)
            self._tick_controllers(t, k)
            self._apply_commands(t)
            self._attacker_inputs(t, k)
            self._grid_step()
            self.state.time = (k + 1) * self.dt
            dev = float(self.coi @ self.state.omega)
            if not (math.isfinite(dev) and abs(dev) <= sc.output.divergence_hz):
                gridcode_step(self.monitor, f0 + dev if math.isfinite(dev) else math.nan, self.dt)
                self.events.append({"kind": "divergence", "time": self.state.time})
                record()
                stopped = "divergence"
                break
            was_ok = self.monitor.compliant
            gridcode_step(self.monitor, f0 + dev, self.dt)
            if was_ok and not self.monitor.compliant:
                vt, band = self.monitor.violation
                self.events.append({"kind": "gridcode_violation", "time": vt, "band": band})
            if (k + 1) % self.meas_steps == 0:
                record()
            if sc.output.stop_on_violation and not self.monitor.compliant:
                if (k + 1) % self.meas_steps:
                    record()
                stopped = "violation"
                break
        if self.agent is not None:
            self.offline_record = self.agent.record
        return self._result(rec, stopped)

    def _result(self, rec, stopped) -> ScenarioResult:
        sc = self.sc
        t = np.array(rec["t"])
        coi = np.array(rec["coi"])
        f0 = self.case.nominal_hz
        violation = self.monitor.violation
        metrics = {"f_min_hz": float(coi.min()), "f_max_hz": float(coi.max()),
                   "ufls_stages": 0 if self.relay is None else int(sum(self.relay.latched)),
                   "shed_fraction": float(rec["shed"][-1]),
                   "lfc_clamps": sum(1 for e in self.events if e["kind"] == "clamp"),
                   "stopped": stopped}
        t_end = t[-1]
        window = t >= max(t_end - sc.output.steady_fraction * sc.duration, min(30.0, t_end))
        if window.any():
            dev = coi[window] - f0
            metrics["steady_dev_hz"] = float(dev.mean())
            metrics["oscillation_pp_hz"] = float(dev.max() - dev.min())
        if violation is not None:
            outcome = "destabilized"
        elif abs(metrics.get("steady_dev_hz", 0.0)) > sc.output.off_nominal_hz:
            outcome = "off-nominal-stable"
        else:
            outcome = "stable"
        if self.agent is not None:
            metrics["mdlaa_status"] = self.agent.status
            metrics["mdlaa_phase"] = self.agent.phase
            metrics["plant_outcome"] = outcome
            # a finished measurement-based attack that never broke the grid code
            if violation is None and self.agent.phase == "done":
                outcome = "failed"
        stats = {name: ch.stats().__dict__ | {"mean_delay": ch.stats().mean_delay}
                 for name, ch in self.channels.items()}
        return ScenarioResult(sc, tuple(self.case.gen_buses), t, coi, np.array(rec["gen"]),
                              np.array(rec["load"]), np.array(rec["attack"]), np.array(rec["lfc"]),
                              np.array(rec["shed"]), self.events, outcome, violation, metrics, stats)


def run(scenario: Scenario, case: GridCase | None = None, offline: OfflineRecord | None = None) -> ScenarioResult:
    """Run one scenario to completion; fully deterministic for fixed seeds."""
    return Engine(scenario, case, offline).run()
