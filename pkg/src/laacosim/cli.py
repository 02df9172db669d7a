"""Command-line front end.

Exit codes:
    0  command completed (a destabilized scenario is still a clean run)
    1  case validation found invariant violations
    2  bad usage or invalid configuration
    3  input/output failure (unreadable input, unwritable output)
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .attacks import predict_critical_gain
from .errors import CaseError, ConfigError, InputFileError, LaaSimError
from .grid import load_case, reduced_model
from .grid.case import validate_case
from .cosim.report import file_stem, manifest_for, render_outputs, write_files

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
OUT_ENV = "LAACOSIM_OUT"
DEFAULT_OUT = "laacosim-out"


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _scenario(args):
    from .cosim import catalog_scenario, load_scenario

    if args.catalog and args.scenario:
        raise ConfigError("give either a scenario file or --catalog, not both")
    if args.catalog:
        sc = catalog_scenario(args.catalog)
    elif args.scenario:
        sc = load_scenario(args.scenario)
    else:
        raise ConfigError("a scenario file or --catalog ID is required")
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    if args.dlaa_gain is not None:
        sc = _with_dlaa_gain(sc, args.dlaa_gain, args.dlaa_unit)
    return sc


def _with_dlaa_gain(sc, text: str, unit: str | None):
    from dataclasses import replace

    from .attacks import DlaaSpec

    if not isinstance(sc.attack, DlaaSpec):
        raise ConfigError("--dlaa-gain needs a scenario with a dynamic (frequency-feedback) attack")
    try:
        gains = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --dlaa-gain {text!r}") from exc
    n = len(sc.attack.buses)
    if len(gains) == 1:
        gains *= n
    if len(gains) != n:
        raise ConfigError(f"--dlaa-gain needs 1 or {n} values, got {len(gains)}")
    attack = replace(sc.attack, gains=gains, unit=unit or sc.attack.unit)
    return replace(sc, attack=attack)


def cmd_validate(args, out) -> int:
    try:
        case = load_case(args.case)
    except CaseError as exc:
        for problem in exc.problems:
            print(f"invalid: {problem}", file=out)
        return EXIT_INVALID
    problems = validate_case(case)
    for problem in problems:
        print(f"invalid: {problem}", file=out)
    if problems:
        return EXIT_INVALID
    print(f"valid: {case.name or args.case} ({len(case.buses)} buses, {case.n_gen} generators, "
          f"{len(case.branches)} branches, {len(case.areas)} areas)", file=out)
    return EXIT_OK


def cmd_run(args, out) -> int:
    from .cosim import Engine
    from .mdlaa.agent import OfflineRecord

    sc = _scenario(args)
    offline = OfflineRecord.load_csv(args.offline) if args.offline else None
    t0 = time.perf_counter()
    engine = Engine(sc, offline=offline)
    result = engine.run()
    stem = file_stem(sc.name)
    files = render_outputs(result, plot=args.plot, stem=stem)
    record = getattr(engine, "offline_record", None)
    if record is not None and offline is None:
        buf = io.StringIO()
        record.write_csv(buf)
        files[f"{stem}.offline.csv"] = buf.getvalue()
    out_dir = _out_dir(args.out)
    paths = {name: str(out_dir / name) for name in files}
    paths[f"{stem}.manifest.json"] = str(out_dir / f"{stem}.manifest.json")
    manifest = manifest_for(result, paths, time.perf_counter() - t0)
    files[f"{stem}.manifest.json"] = manifest.to_json()
    write_files(files, out_dir)
    print(f"{sc.name}: {result.outcome_label()}", file=out)
    return EXIT_OK


def _values(text: str) -> list[float]:
    if not text.strip():
        return []
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise ConfigError("sweep step must be > 0")
        n = int(round((stop - start) / step))
        return [round(start + i * step, 12) for i in range(n + 1)]
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad sweep values {text!r}") from exc


def cmd_sweep(args, out) -> int:
    from .cosim import failure_threshold, is_monotone, sweep

    sc = _scenario(args)
    points = sweep(sc, tuple(args.path), _values(args.values), workers=args.workers)
    lines = ["value,outcome,violation_time_s,f_min_hz,f_max_hz"]
    for p in points:
        vt = "" if p.violation_time is None else repr(p.violation_time)
        lines.append(f"{p.value!r},{p.outcome},{vt},{p.f_min_hz!r},{p.f_max_hz!r}")
        print(f"{'+'.join(args.path)}={p.value:g}: {p.outcome}"
              + ("" if p.violation_time is None else f" at {p.violation_time:.2f} s"), file=out)
    threshold = failure_threshold(points)
    print(f"failure threshold: {'none' if threshold is None else f'{threshold:g}'}; "
          f"monotone: {'yes' if is_monotone(points) else 'no'}", file=out)
    write_files({f"{file_stem(sc.name)}.sweep.csv": "\n".join(lines) + "\n"}, _out_dir(args.out))
    return EXIT_OK


def cmd_calibrate(args, out) -> int:
    case = load_case(args.case)
    buses = tuple(int(b) for b in args.buses.split(","))
    source = args.source if args.source == "coi" else int(args.source)
    red = reduced_model(case.with_generators(KI=0.0))
    rep = predict_critical_gain(red, case, buses, k_max=args.k_max, source=source)
    doc = rep.to_dict()
    if rep.k_crit is None:
        print(f"buses {list(buses)}: stable for every gain up to {args.k_max:g} pu/Hz", file=out)
    else:
        doc["suggested_gains"] = {"sub_critical": 0.875 * rep.k_crit, "near_critical": rep.k_crit}
        print(f"buses {list(buses)}: K_crit = {rep.k_crit:.4f} pu/Hz (tolerance {rep.tol:g})", file=out)
    name = f"calibration_{'_'.join(str(b) for b in buses)}.json"
    write_files({name: json.dumps(doc, indent=2, sort_keys=True) + "\n"}, _out_dir(args.out))
    return EXIT_OK


def cmd_catalog(args, out) -> int:
    from .cosim import scenario_catalog

    cat = scenario_catalog()
    for sid, sc in cat.items():
        print(f"{sid:6s} {sc.description}", file=out)
    if args.export:
        write_files({f"{file_stem(sid)}.json": json.dumps(sc.to_dict(), indent=2, sort_keys=True) + "\n"
                     for sid, sc in cat.items()}, args.export)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="laacosim", description=__doc__.splitlines()[0],
                                epilog=__doc__.split("\n", 1)[1], formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"laacosim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a grid case file")
    v.add_argument("case", help="case JSON path or bundled name (ieee39)")
    v.set_defaults(func=cmd_validate)

    def scenario_args(sp):
        sp.add_argument("scenario", nargs="?", help="scenario JSON file")
        sp.add_argument("--catalog", metavar="ID", help="built-in scenario id, e.g. IV.2")
        sp.add_argument("--seed", type=int, help="reseed every link and the attacker")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        sp.add_argument("--dlaa-gain", metavar="K[,K...]",
                        help="override the feedback gain of a dynamic attack (one value or one per bus)")
        sp.add_argument("--dlaa-unit", choices=("pu/Hz", "pu/(rad/s)"),
                        help="unit of --dlaa-gain (default: the scenario's)")

    r = sub.add_parser("run", help="run one scenario")
    scenario_args(r)
    r.add_argument("--plot", action="store_true", help="also write an SVG frequency plot")
    r.add_argument("--offline", help="replay a saved MDLAA offline record (CSV)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a scenario over a range of one parameter")
    scenario_args(s)
    s.add_argument("--path", action="append", required=True,
                   help="dotted scenario-file key, e.g. links.plant_to_ctrl.delay_ms (repeatable)")
    s.add_argument("--values", required=True, help="comma list or start:stop:step")
    s.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("calibrate", help="critical DLAA gain for a bus set")
    c.add_argument("--case", default="ieee39")
    c.add_argument("--buses", default="4,20")
    c.add_argument("--source", default="coi", help="'coi' or a generator bus id")
    c.add_argument("--k-max", type=float, default=10.0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)

    k = sub.add_parser("catalog", help="list the built-in scenarios")
    k.add_argument("--export", metavar="DIR", help="write each scenario as JSON")
    k.set_defaults(func=cmd_catalog)
    return p


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args, out)
    except CaseError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except LaaSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
