"""Static grid description and its JSON case-file format.

A case file is a JSON object::

    {
      "name": "...",
      "nominal_hz": 60.0,
      "base_mva": 100.0,
      "areas":      [{"id": 1, "name": "north"}],
      "buses":      [{"id": 1, "area": 1}, ...],
      "branches":   [{"from": 1, "to": 2, "b": 24.3}, ...],
      "generators": [{"bus": 30, "M": 1.4, "D": 0.1, "R": 0.3,
                      "KP": 0.3, "KI": 0.0, "alpha": 0.4}, ...],
      "loads":      [{"bus": 4, "p": 5.0, "vulnerable": 1.0}, ...]
    }

Generator buses are the buses named in ``generators``; every other bus is a
load bus (possibly with zero load). All powers are per-unit on ``base_mva``;
``M`` is in pu*s/Hz, ``D``, ``R`` and ``KP`` in pu/Hz, ``KI`` in pu/(Hz*s).
A generator may also set ``"lag": true`` with ``T_gov`` and ``T_turb`` (s) to
put first-order governor and turbine lags behind its setpoint.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ..errors import CaseError, InputFileError


@dataclass(frozen=True)
class Bus:
    id: int
    area: int


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    b: float


@dataclass(frozen=True)
class Generator:
    bus: int
    M: float
    D: float
    R: float
    KP: float
    KI: float
    alpha: float
    lag: bool = False        # first-order governor then turbine lag on mechanical power
    T_gov: float = 0.2       # s
    T_turb: float = 0.5      # s


@dataclass(frozen=True)
class Load:
    bus: int
    p: float
    vulnerable: float = 1.0


@dataclass(frozen=True)
class Area:
    id: int
    name: str = ""


@dataclass(frozen=True)
class GridCase:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    areas: tuple[Area, ...]
    nominal_hz: float = 60.0
    base_mva: float = 100.0
    name: str = ""
    notes: tuple[str, ...] = field(default=(), compare=False)

    # -- indexing -----------------------------------------------------------
    @cached_property
    def gen_buses(self) -> tuple[int, ...]:
        return tuple(g.bus for g in self.generators)

    @cached_property
    def load_buses(self) -> tuple[int, ...]:
        gens = set(self.gen_buses)
        return tuple(sorted(b.id for b in self.buses if b.id not in gens))

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    @property
    def n_load(self) -> int:
        return len(self.load_buses)

    @cached_property
    def gen_index(self) -> dict[int, int]:
        return {bus: i for i, bus in enumerate(self.gen_buses)}

    @cached_property
    def load_index(self) -> dict[int, int]:
        return {bus: i for i, bus in enumerate(self.load_buses)}

    @cached_property
    def bus_area(self) -> dict[int, int]:
        return {b.id: b.area for b in self.buses}

    @cached_property
    def area_ids(self) -> tuple[int, ...]:
        return tuple(a.id for a in self.areas)

    def gen_vector(self, attr: str) -> np.ndarray:
        return np.array([getattr(g, attr) for g in self.generators], dtype=float)

    @cached_property
    def nominal_load(self) -> np.ndarray:
        """Secure load per load bus (pu), in ``load_buses`` order."""
        p = np.zeros(self.n_load)
        for ld in self.loads:
            p[self.load_index[ld.bus]] += ld.p
        return p

    @cached_property
    def vulnerable_fraction(self) -> np.ndarray:
        v = np.zeros(self.n_load)
        for ld in self.loads:
            v[self.load_index[ld.bus]] = ld.vulnerable
        return v

    @property
    def total_load(self) -> float:
        return float(self.nominal_load.sum())

    def area_gens(self, area: int) -> list[int]:
        """Generator indices located in ``area``."""
        return [i for i, g in enumerate(self.generators) if self.bus_area[g.bus] == area]

    @cached_property
    def coi_weights(self) -> np.ndarray:
        """Inertia weights for the centre-of-inertia (system-average) frequency."""
        m = self.gen_vector("M")
        return m / m.sum()

    def tie_lines(self, area: int) -> list[tuple[int, int, float]]:
        """Branches leaving ``area`` as (inside bus, outside bus, b)."""
        out = []
        for br in self.branches:
            a_from, a_to = self.bus_area[br.from_bus], self.bus_area[br.to_bus]
            if a_from == area and a_to != area:
                out.append((br.from_bus, br.to_bus, br.b))
            elif a_to == area and a_from != area:
                out.append((br.to_bus, br.from_bus, br.b))
        return out

    def with_generators(self, **overrides) -> "GridCase":
        """Copy of the case with generator fields replaced, e.g. ``KI=0``.

        Each override is a scalar or a per-generator sequence.
        """
        gens = []
        for i, g in enumerate(self.generators):
            kw = {}
            for name, value in overrides.items():
                v = value[i] if np.ndim(value) else value
                kw[name] = v if isinstance(v, bool) else float(v)
            gens.append(Generator(**{**g.__dict__, **kw}))
        return GridCase(self.buses, self.branches, tuple(gens), self.loads, self.areas,
                        self.nominal_hz, self.base_mva, self.name, self.notes)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "notes": list(self.notes),
            "nominal_hz": self.nominal_hz,
            "base_mva": self.base_mva,
            "areas": [{"id": a.id, "name": a.name} for a in self.areas],
            "buses": [{"id": b.id, "area": b.area} for b in self.buses],
            "branches": [{"from": b.from_bus, "to": b.to_bus, "b": b.b} for b in self.branches],
            "generators": [dict(g.__dict__) for g in self.generators],
            "loads": [{"bus": ld.bus, "p": ld.p, "vulnerable": ld.vulnerable} for ld in self.loads],
        }


# ---------------------------------------------------------------------------
# parsing and validation


def _num(obj, key, where, problems, default=None):
    if key not in obj:
        if default is not None:
            return float(default)
        problems.append(f"{where}.{key}: missing")
        return math.nan
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{where}.{key}: expected a number, got {value!r}")
        return math.nan
    return float(value)


def _int(obj, key, where, problems):
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        problems.append(f"{where}.{key}: expected an integer bus/area id, got {value!r}")
        return -1
    return value


def _bool(obj, key, where, problems, default=False):
    value = obj.get(key, default)
    if not isinstance(value, bool):
        problems.append(f"{where}.{key}: expected true or false, got {value!r}")
        return default
    return value


def _list(doc, key, problems):
    value = doc.get(key)
    if not isinstance(value, list):
        problems.append(f"{key}: expected a list")
        return []
    return value


def case_from_dict(doc: dict) -> GridCase:
    """Build a :class:`GridCase` from a decoded case document and validate it."""
    problems: list[str] = []
    if not isinstance(doc, dict):
        raise CaseError("case document must be a JSON object")

    areas = []
    for i, a in enumerate(_list(doc, "areas", problems)):
        areas.append(Area(_int(a, "id", f"areas[{i}]", problems), str(a.get("name", ""))))
    buses = []
    for i, b in enumerate(_list(doc, "buses", problems)):
        buses.append(Bus(_int(b, "id", f"buses[{i}]", problems),
                         _int(b, "area", f"buses[{i}]", problems)))
    branches = []
    for i, br in enumerate(_list(doc, "branches", problems)):
        w = f"branches[{i}]"
        branches.append(Branch(_int(br, "from", w, problems), _int(br, "to", w, problems),
                               _num(br, "b", w, problems)))
    gens = []
    for i, g in enumerate(_list(doc, "generators", problems)):
        w = f"generators[{i}]"
        gens.append(Generator(
            bus=_int(g, "bus", w, problems),
            M=_num(g, "M", w, problems),
            D=_num(g, "D", w, problems, default=0.0),
            R=_num(g, "R", w, problems, default=0.0),
            KP=_num(g, "KP", w, problems, default=0.0),
            KI=_num(g, "KI", w, problems, default=0.0),
            alpha=_num(g, "alpha", w, problems, default=0.0),
            lag=_bool(g, "lag", w, problems),
            T_gov=_num(g, "T_gov", w, problems, default=0.2),
            T_turb=_num(g, "T_turb", w, problems, default=0.5),
        ))
    loads = []
    for i, ld in enumerate(_list(doc, "loads", problems)):
        w = f"loads[{i}]"
        loads.append(Load(_int(ld, "bus", w, problems), _num(ld, "p", w, problems),
                          _num(ld, "vulnerable", w, problems, default=1.0)))
    if problems:
        raise CaseError(problems)

    case = GridCase(
        buses=tuple(buses), branches=tuple(branches), generators=tuple(gens),
        loads=tuple(loads), areas=tuple(areas),
        nominal_hz=float(doc.get("nominal_hz", 60.0)),
        base_mva=float(doc.get("base_mva", 100.0)),
        name=str(doc.get("name", "")),
        notes=tuple(doc.get("notes", ())),
    )
    problems = validate_case(case)
    if problems:
        raise CaseError(problems)
    return case


def validate_case(case: GridCase) -> list[str]:
    """Return every invariant violation of ``case`` (empty list when valid)."""
    problems = []
    area_ids = [a.id for a in case.areas]
    if len(set(area_ids)) != len(area_ids):
        problems.append("areas: duplicate area id")
    bus_ids = [b.id for b in case.buses]
    seen = set()
    for i, b in enumerate(case.buses):
        if b.id in seen:
            problems.append(f"buses[{i}].id: bus {b.id} listed more than once")
        seen.add(b.id)
        if b.area not in area_ids:
            problems.append(f"buses[{i}].area: bus {b.id} assigned to unknown area {b.area}")
    bus_set = set(bus_ids)

    for i, br in enumerate(case.branches):
        for end in ("from_bus", "to_bus"):
            bus = getattr(br, end)
            if bus not in bus_set:
                key = "from" if end == "from_bus" else "to"
                problems.append(f"branches[{i}].{key}: dangling endpoint, bus {bus} does not exist")
        if br.from_bus == br.to_bus:
            problems.append(f"branches[{i}]: self-loop on bus {br.from_bus}")
        if not math.isfinite(br.b):
            problems.append(f"branches[{i}].b: susceptance must be finite")

    gen_seen = set()
    for i, g in enumerate(case.generators):
        w = f"generators[{i}]"
        if g.bus not in bus_set:
            problems.append(f"{w}.bus: bus {g.bus} does not exist")
        if g.bus in gen_seen:
            problems.append(f"{w}.bus: more than one generator on bus {g.bus}")
        gen_seen.add(g.bus)
        if not g.M > 0:
            problems.append(f"{w}.M: inertia must be > 0 (got {g.M})")
        for name in ("D", "R", "KP", "KI", "alpha"):
            v = getattr(g, name)
            if not math.isfinite(v) or v < 0:
                problems.append(f"{w}.{name}: must be finite and >= 0 (got {v})")
        if g.lag and not (g.T_gov > 0 and g.T_turb > 0 and math.isfinite(g.T_gov + g.T_turb)):
            problems.append(f"{w}: governor and turbine time constants must be > 0 when lag is on")
    if not case.generators:
        problems.append("generators: at least one generator is required")

    for i, ld in enumerate(case.loads):
        w = f"loads[{i}]"
        if ld.bus not in bus_set:
            problems.append(f"{w}.bus: bus {ld.bus} does not exist")
        elif ld.bus in gen_seen:
            problems.append(f"{w}.bus: bus {ld.bus} is a generator bus; loads must sit on load buses")
        if not math.isfinite(ld.p):
            problems.append(f"{w}.p: must be finite")
        if not 0.0 <= ld.vulnerable <= 1.0:
            problems.append(f"{w}.vulnerable: fraction must lie in [0, 1] (got {ld.vulnerable})")

    if not problems:
        for area in area_ids:
            idx = [i for i, g in enumerate(case.generators) if case.bus_area.get(g.bus) == area]
            total = sum(case.generators[i].alpha for i in idx)
            if idx:
                if abs(total - 1.0) > 1e-6:
                    problems.append(
                        f"areas[{area_ids.index(area)}]: participation factors of area {area} "
                        f"sum to {total:.6g}, expected 1")
    if not (case.nominal_hz > 0 and case.base_mva > 0):
        problems.append("nominal_hz/base_mva: must be > 0")
    return problems


def loads_json(text: str, source: str = "<string>") -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc


def load_case(path: str | Path) -> GridCase:
    """Read and validate a case file; ``"ieee39"`` names the bundled case."""
    if str(path) in BUNDLED_CASES:
        path = BUNDLED_CASES[str(path)]
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputFileError(f"{path}: cannot read case file ({exc.strerror})") from exc
    return case_from_dict(loads_json(text, str(path)))


BUNDLED_CASES = {
    "ieee39": Path(__file__).resolve().parent.parent / "data" / "ieee39.json",
}
