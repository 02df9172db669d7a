"""Built-in scenario catalog and parameter sweeps.

Scenarios I-IV attack load buses 4 and 20; V-VI spread a measurement-based
attack over every loaded bus. The dynamic-attack families (III, IV) run the
LFC over a SCADA path with 1 s one-way latency; the other families use ideal
links unless a variant says otherwise. Within a family, variants 4-5 add
delay and 6-7 add loss on the controller links.
"""

from __future__ import annotations

import copy
import functools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from ..attacks import DlaaSpec, SlaaSpec, predict_critical_gain
from ..controllers import ControllerConfig
from ..errors import ConfigError
from ..grid import load_case, reduced_model
from ..mdlaa.config import MdlaaSpec
from ..netem import NetProfile
from ..protection import UflsConfig
from .scenario import LINK_NAMES, Scenario, scenario_from_dict

TARGETS = (4, 20)
GAIN_FACTORS = {"III": 0.875, "IV": 1.0}
SCADA_DELAY_S = 1.0
DLAA_KICK = 0.05
MDLAA_TARGET_HZ = -3.5

_LFC = ControllerConfig(enabled=True)
_UFLS = UflsConfig(enabled=True)


def _links(delay: float = 0.0, loss: float = 0.0, seed: int = 0) -> dict:
    links = {name: NetProfile(seed=seed + i) for i, name in enumerate(LINK_NAMES)}
    for i, name in enumerate(("plant_to_ctrl", "ctrl_to_plant")):
        links[name] = NetProfile(delay=delay, loss=loss, seed=seed + i)
    return links


@functools.lru_cache(maxsize=4)
def critical_gain(case_name: str = "ieee39", buses: tuple[int, ...] = TARGETS) -> float:
    case = load_case(case_name)
    red = reduced_model(case.with_generators(KI=0.0))
    return predict_critical_gain(red, case, buses).k_crit


def _family_I() -> list[Scenario]:
    attack = SlaaSpec(TARGETS, (0.2, 0.2))
    return [
        Scenario("I.1", duration=300.0, attack=attack, description="static 20% on buses 4 and 20, primary only"),
        Scenario("I.2", duration=300.0, attack=attack, lfc=_LFC, description="as I.1 with LFC"),
    ]


def _family_II() -> list[Scenario]:
    attack = SlaaSpec(TARGETS, (1.0, 0.76))
    base = dict(duration=120.0, attack=attack)
    return [
        Scenario("II.1", **base, description="static 100%/76%, no protection"),
        Scenario("II.2", **base, lfc=_LFC, description="with LFC"),
        Scenario("II.3", **base, ufls=_UFLS, description="with UFLS only"),
        Scenario("II.4", **base, lfc=_LFC, ufls=_UFLS, description="with LFC and UFLS"),
        Scenario("II.5", **base, ufls=_UFLS, links=_links(delay=1.0),
                 description="UFLS only, 1 s one-way controller delay"),
        Scenario("II.6", **base, ufls=_UFLS, links=_links(loss=0.5),
                 description="UFLS only, 50% controller packet loss"),
    ]


def _family_dlaa(label: str) -> list[Scenario]:
    k = GAIN_FACTORS[label] * critical_gain()
    attack = DlaaSpec(TARGETS, (k, k), kick=DLAA_KICK)
    base = dict(duration=300.0, attack=attack, links=_links(delay=SCADA_DELAY_S))
    both = dict(lfc=_LFC, ufls=_UFLS)
    desc = f"frequency feedback {GAIN_FACTORS[label]:g} x critical gain ({k:.4f} pu/Hz per bus)"
    return [
        Scenario(f"{label}.1", **base, description=desc + ", no protection"),
        Scenario(f"{label}.2", **base, lfc=_LFC, description=desc + ", LFC"),
        Scenario(f"{label}.3", **base, **both, description=desc + ", LFC and UFLS"),
        Scenario(f"{label}.4", **{**base, "links": _links(delay=1.5)}, **both,
                 description=desc + ", LFC and UFLS, 1.5 s delay"),
        Scenario(f"{label}.5", **{**base, "links": _links(delay=2.0)}, **both,
                 description=desc + ", LFC and UFLS, 2 s delay"),
        Scenario(f"{label}.6", **{**base, "links": _links(delay=SCADA_DELAY_S, loss=0.2)}, **both,
                 description=desc + ", LFC and UFLS, 20% loss"),
        Scenario(f"{label}.7", **{**base, "links": _links(delay=SCADA_DELAY_S, loss=0.4)}, **both,
                 description=desc + ", LFC and UFLS, 40% loss"),
    ]


def _family_mdlaa(label: str, budget: float, variants: int) -> list[Scenario]:
    attack = MdlaaSpec(budget=budget, omega_r=MDLAA_TARGET_HZ)
    desc = f"measurement-based attack, {budget:.0%} of system load"
    configs = [({}, ", no protection"), ({"lfc": _LFC}, ", LFC"),
               ({"lfc": _LFC, "ufls": _UFLS}, ", LFC and UFLS")]
    return [Scenario(f"{label}.{i + 1}", duration=300.0, attack=attack, description=desc + tail, **kw)
            for i, (kw, tail) in enumerate(configs[:variants])]


def scenario_catalog() -> dict[str, Scenario]:
    """Every built-in scenario keyed by id (``"I.1"`` ... ``"VI.3"``)."""
    scenarios = (_family_I() + _family_II() + _family_dlaa("III") + _family_dlaa("IV")
                 + _family_mdlaa("V", 0.3, 2) + _family_mdlaa("VI", 0.6, 3))
    return {sc.name: sc for sc in scenarios}


def catalog_scenario(scenario_id: str) -> Scenario:
    cat = scenario_catalog()
    if scenario_id not in cat:
        raise ConfigError(f"unknown catalog scenario {scenario_id!r}; known: {', '.join(cat)}")
    return cat[scenario_id]


# -- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    value: float
    outcome: str
    violation_time: float | None
    f_min_hz: float
    f_max_hz: float


def _walk(doc: dict, path: str):
    keys = path.split(".")
    node = doc
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node or node[key] is None:
            raise ConfigError(f"sweep path {path!r} does not exist")
        node = node[key]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ConfigError(f"sweep path {path!r} does not exist")
    value = node[keys[-1]]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"sweep path {path!r} is not numeric (holds {value!r})")
    return node, keys[-1]


def apply_value(scenario: Scenario, paths: str | tuple[str, ...], value: float) -> Scenario:
    """Copy of ``scenario`` with every dotted ``path`` (scenario-file keys) set to ``value``."""
    paths = (paths,) if isinstance(paths, str) else tuple(paths)
    doc = copy.deepcopy(scenario.to_dict())
    for path in paths:
        node, key = _walk(doc, path)
        node[key] = value
    doc["name"] = f"{scenario.name}[{'+'.join(paths)}={value:g}]"
    return scenario_from_dict(doc)


def _run_point(args) -> SweepPoint:
    from .engine import run

    sc, value = args
    r = run(sc)
    return SweepPoint(value, r.outcome, r.violation_time, r.metrics["f_min_hz"], r.metrics["f_max_hz"])


def sweep(scenario: Scenario, paths: str | tuple[str, ...], values, workers: int | None = None
          ) -> list[SweepPoint]:
    """Run ``scenario`` once per value; results follow the input order."""
    values = [float(v) for v in values]
    configs = [(apply_value(scenario, paths, v), v) for v in values]   # validate before running
    if not configs:
        return []
    if workers and workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_point, configs))
    return [_run_point(c) for c in configs]


def failure_threshold(points: list[SweepPoint]) -> float | None:
    """Smallest swept value from which every later point is destabilized."""
    threshold = None
    for p in points:
        if p.outcome == "destabilized":
            if threshold is None:
                threshold = p.value
        else:
            threshold = None
    return threshold


def is_monotone(points: list[SweepPoint]) -> bool:
    """True when outcomes never recover once destabilized along the sweep."""
    seen = False
    for p in points:
        if p.outcome == "destabilized":
            seen = True
        elif seen:
            return False
    return True
