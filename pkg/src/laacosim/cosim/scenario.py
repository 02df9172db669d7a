"""Scenario description and its JSON file format."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..attacks import DlaaSpec, SlaaSpec
from ..controllers import ControllerConfig
from ..errors import ConfigError, InputFileError
from ..mdlaa.config import MdlaaSpec
from ..netem import NetProfile
from ..protection import THIRTY_MIN, THIRTY_S, UflsConfig

LINK_NAMES = ("plant_to_ctrl", "ctrl_to_plant", "plant_to_attacker")


@dataclass(frozen=True)
class GridCodeConfig:
    dwell_30min_s: float = THIRTY_MIN
    dwell_30s_s: float = THIRTY_S

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class OutputOptions:
    off_nominal_hz: float = 0.01
    steady_fraction: float = 0.1
    divergence_hz: float = 20.0
    stop_on_violation: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Scenario:
    name: str
    case: str = "ieee39"
    duration: float = 120.0
    dt: float = 0.01
    measurement_period: float = 0.1
    attack: SlaaSpec | DlaaSpec | MdlaaSpec | None = None
    lfc: ControllerConfig = field(default_factory=lambda: ControllerConfig(enabled=False))
    ufls: UflsConfig = field(default_factory=lambda: UflsConfig(enabled=False))
    links: dict = field(default_factory=lambda: {k: NetProfile() for k in LINK_NAMES})
    gridcode: GridCodeConfig = field(default_factory=GridCodeConfig)
    output: OutputOptions = field(default_factory=OutputOptions)
    description: str = ""

    def __post_init__(self):
        if not self.duration > 0 or not self.dt > 0:
            raise ConfigError("duration and dt must be > 0")
        start = getattr(self.attack, "start", None)
        if start is not None and not self.duration > start:
            raise ConfigError(f"duration ({self.duration}) must exceed attack start ({start})")
        ratio = self.measurement_period / self.dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError("measurement_period must be a whole multiple of dt")
        lfc_ratio = self.lfc.period_ms / 1000.0 / self.dt
        if abs(lfc_ratio - round(lfc_ratio)) > 1e-9 or round(lfc_ratio) < 1:
            raise ConfigError("LFC period must be a whole multiple of dt")
        missing = set(LINK_NAMES) - set(self.links)
        if missing:
            raise ConfigError(f"missing link profiles: {sorted(missing)}")

    @property
    def attack_start(self) -> float | None:
        return getattr(self.attack, "start", None)

    def with_seed(self, seed: int) -> "Scenario":
        links = {name: replace(p, seed=seed + i) for i, (name, p) in enumerate(sorted(self.links.items()))}
        attack = self.attack
        if isinstance(attack, MdlaaSpec):
            attack = replace(attack, seed=seed)
        return replace(self, links=links, attack=attack)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "case": self.case,
            "duration_s": self.duration,
            "dt_s": self.dt,
            "measurement_period_s": self.measurement_period,
            "attack": None if self.attack is None else self.attack.to_dict(),
            "lfc": self.lfc.to_dict(),
            "ufls": self.ufls.to_dict(),
            "links": {k: v.to_dict() for k, v in sorted(self.links.items())},
            "gridcode": self.gridcode.to_dict(),
            "output": self.output.to_dict(),
        }

    def digest(self) -> str:
        """Platform-independent hash of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def attack_from_dict(d: dict | None):
    if d is None:
        return None
    d = dict(d)
    kind = d.pop("type", None)
    start = float(d.pop("start_s", 30.0))
    buses = tuple(int(b) for b in d.pop("buses", ()))
    try:
        if kind == "slaa":
            return SlaaSpec(buses, tuple(float(f) for f in d.pop("fractions")), start)
        if kind == "dlaa":
            return DlaaSpec(buses, tuple(float(k) for k in d.pop("gains")), start,
                            source=d.pop("source", "coi"), kick=float(d.pop("kick", 0.0)),
                            unit=d.pop("unit", "pu/Hz"), period=d.pop("period_s", None))
        if kind == "mdlaa":
            return MdlaaSpec.from_dict({**d, "buses": list(buses), "start_s": start})
    except KeyError as exc:
        raise ConfigError(f"attack block missing {exc.args[0]!r}") from exc
    raise ConfigError(f"unknown attack type {kind!r}")


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    doc = copy.deepcopy(doc)
    known = {"name", "description", "case", "duration_s", "dt_s", "measurement_period_s", "attack",
             "lfc", "ufls", "links", "gridcode", "output"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    links_doc = doc.get("links") or {}
    unknown_links = set(links_doc) - set(LINK_NAMES)
    if unknown_links:
        raise ConfigError(f"unknown links: {sorted(unknown_links)}")
    links = {name: NetProfile.from_dict(links_doc.get(name)) for name in LINK_NAMES}
    gc = doc.get("gridcode") or {}
    out = doc.get("output") or {}
    try:
        return Scenario(
            name=str(doc.get("name", "scenario")),
            description=str(doc.get("description", "")),
            case=str(doc.get("case", "ieee39")),
            duration=float(doc.get("duration_s", 120.0)),
            dt=float(doc.get("dt_s", 0.01)),
            measurement_period=float(doc.get("measurement_period_s", 0.1)),
            attack=attack_from_dict(doc.get("attack")),
            lfc=ControllerConfig.from_dict(doc.get("lfc") or {"enabled": False}),
            ufls=UflsConfig.from_dict(doc.get("ufls") or {"enabled": False}),
            links=links,
            gridcode=GridCodeConfig(**gc),
            output=OutputOptions(**out),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputFileError(f"{path}: cannot read scenario file ({exc.strerror})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    return scenario_from_dict(doc)
