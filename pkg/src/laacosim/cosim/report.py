"""Result files: CSV trace, JSON event log, SVG frequency plot, run manifest.

CSV schema (one row per measurement period, fixed column order):

    time_s            logical time
    f_coi_hz          inertia-weighted system frequency
    f_gen<bus>_hz     one column per generator, in case order
    load_pu           connected secure load
    attack_pu         total injected attack load
    lfc_pu            total LFC setpoint
    shed_fraction     cumulative UFLS shed, fraction of initial load

Values are written with ``repr`` so reruns are byte-identical.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..protection import ShedCommand
from .engine import ScenarioResult

BAND_LINES = ((57.0, 62.5, "#c0392b"), (57.5, 61.5, "#e67e22"), (58.8, 60.5, "#27ae60"))


def csv_columns(result: ScenarioResult) -> list[str]:
    return (["time_s", "f_coi_hz"] + [f"f_gen{b}_hz" for b in result.gen_buses]
            + ["load_pu", "attack_pu", "lfc_pu", "shed_fraction"])


def _fmt(v: float) -> str:
    return repr(float(v))


def csv_text(result: ScenarioResult) -> str:
    lines = [",".join(csv_columns(result))]
    for i, t in enumerate(result.time):
        row = [t, result.f_coi[i], *result.f_gen[i], result.load[i], result.attack[i], result.lfc[i],
               result.shed[i]]
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, ShedCommand):
        return {"stages": list(obj.stages), "fraction": obj.fraction, "time": obj.time}
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def events_document(result: ScenarioResult) -> dict:
    return {
        "scenario": result.scenario.name,
        "outcome": result.outcome,
        "verdict": result.verdict,
        "violation": None if result.violation is None else
        {"time_s": result.violation[0], "band": result.violation[1]},
        "metrics": result.metrics,
        "channels": result.channel_stats,
        "events": result.events,
    }


def events_json(result: ScenarioResult) -> str:
    return json.dumps(events_document(result), indent=2, sort_keys=True, default=_jsonable) + "\n"


def svg_plot(result: ScenarioResult, width: int = 800, height: int = 360) -> str:
    """Frequency trace with the grid-code band pairs drawn as horizontal lines."""
    pad_l, pad_r, pad_t, pad_b = 60, 20, 30, 40
    t = result.time
    f = result.f_coi
    lo = min(56.5, float(np.nanmin(f)) - 0.2) if f.size else 56.5
    hi = max(63.0, float(np.nanmax(f)) + 0.2) if f.size else 63.0
    t0, t1 = (float(t[0]), float(t[-1])) if t.size else (0.0, 1.0)
    t1 = t1 if t1 > t0 else t0 + 1.0
    W, H = width - pad_l - pad_r, height - pad_t - pad_b

    def x(v):
        return pad_l + (v - t0) / (t1 - t0) * W

    def y(v):
        return pad_t + (hi - v) / (hi - lo) * H

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{pad_l}" y="18" font-family="sans-serif" font-size="13">'
           f'{result.scenario.name}: {result.outcome_label()}</text>']
    for low, high, colour in BAND_LINES:
        for v in (low, high):
            out.append(f'<line class="band" x1="{pad_l}" x2="{pad_l + W}" y1="{y(v):.2f}" y2="{y(v):.2f}" '
                       f'stroke="{colour}" stroke-dasharray="6,4" data-hz="{v}"/>')
            out.append(f'<text x="{pad_l - 6}" y="{y(v) + 4:.2f}" font-family="sans-serif" font-size="10" '
                       f'text-anchor="end">{v}</text>')
    pts = " ".join(f"{x(a):.2f},{y(b):.2f}" for a, b in zip(t, f) if math.isfinite(b))
    out.append(f'<polyline fill="none" stroke="#1f4e79" stroke-width="1.2" points="{pts}"/>')
    out.append(f'<line x1="{pad_l}" x2="{pad_l + W}" y1="{pad_t + H}" y2="{pad_t + H}" stroke="black"/>')
    out.append(f'<line x1="{pad_l}" x2="{pad_l}" y1="{pad_t}" y2="{pad_t + H}" stroke="black"/>')
    out.append(f'<text x="{pad_l + W / 2}" y="{height - 8}" font-family="sans-serif" font-size="11" '
               f'text-anchor="middle">time (s)</text>')
    out.append(f'<text x="14" y="{pad_t + H / 2}" font-family="sans-serif" font-size="11" '
               f'transform="rotate(-90 14 {pad_t + H / 2})" text-anchor="middle">frequency (Hz)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


@dataclass
class RunManifest:
    tool_version: str
    scenario: str
    scenario_hash: str
    seeds: dict
    outputs: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def manifest_for(result: ScenarioResult, outputs: dict, wall_clock: float) -> RunManifest:
    sc = result.scenario
    seeds = {name: p.seed for name, p in sorted(sc.links.items())}
    if hasattr(sc.attack, "seed"):
        seeds["mdlaa"] = sc.attack.seed
    return RunManifest(__version__, sc.name, sc.digest(), seeds, outputs, round(wall_clock, 3))


def file_stem(name: str) -> str:
    return "".join(c if c.isalnum() or c in ".-_" else "_" for c in name)


def write_files(files: dict[str, str], out_dir: str | Path) -> dict[str, str]:
    """Write already-rendered ``{file name: text}``; on any failure the files
    written so far are removed again so no partial result set is left."""
    out_dir = Path(out_dir)
    written: list[Path] = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            path = out_dir / name
            tmp = path.with_name(path.name + ".part")
            tmp.write_text(text)
            os.replace(tmp, path)
            written.append(path)
    except OSError:
        for path in written:
            path.unlink(missing_ok=True)
        for name in files:
            (out_dir / (name + ".part")).unlink(missing_ok=True)
        raise
    return {name: str(out_dir / name) for name in files}


def render_outputs(result: ScenarioResult, plot: bool = False, stem: str | None = None) -> dict[str, str]:
    stem = stem or file_stem(result.scenario.name)
    files = {f"{stem}.csv": csv_text(result), f"{stem}.events.json": events_json(result)}
    if plot:
        files[f"{stem}.svg"] = svg_plot(result)
    return files


def write_outputs(result: ScenarioResult, out_dir: str | Path, plot: bool = False,
                  stem: str | None = None) -> dict[str, str]:
    return write_files(render_outputs(result, plot, stem), out_dir)
