"""Command-line entry point: ``gstateprep {run,audit,profile,sweep,trigcheck}``.

Exit codes: 0 success with every hard audit passing, 1 audit failure,
2 usage or scenario error.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .analysis import (
    PROFILE_COLUMNS,
    SWEEP_COLUMNS,
    rows_to_csv,
    sorted_profile,
    sweep,
    verify_trig_inequalities,
)
from .errors import GStatePrepError
from .executor import RunOptions, new_seed, run_full
from .target import OVERRIDE_KEYS, SCENARIO_KEYS, parse_scenario, read_scenario

EXIT_OK, EXIT_AUDIT, EXIT_USAGE = 0, 1, 2
AUDIT_COLUMNS = ("name", "anchor", "kind", "privileged", "lhs", "rhs", "margin", "passed", "note")

log = logging.getLogger("gstateprep")
_RATIONAL = re.compile(r"^\s*-?\d+\s*/\s*\d+\s*$")


class UsageError(Exception):
    pass


def parse_value(text: str):
    """``1/8`` becomes a Fraction; anything else goes through YAML scalars."""
    if _RATIONAL.match(text):
        return Fraction(text.replace(" ", ""))
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse value {text!r}") from exc


def _split_assignment(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise UsageError(f"expected key=value, got {item!r}")
    key, value = item.split("=", 1)
    return key.strip(), value.strip()


def route_key(key: str) -> tuple[str, str]:
    """Map a dotted path onto ``("overrides" | "scenario", key)``."""
    head, _, tail = key.partition(".")
    if tail:
        if head in ("params", "overrides") and tail in OVERRIDE_KEYS:
            return "overrides", tail
        if head == "scenario" and tail in SCENARIO_KEYS:
            return "scenario", tail
        if head in ("family_params", "phi_params"):
            return "scenario", key
        raise UsageError(f"unknown setting {key!r}")
    if key in OVERRIDE_KEYS:
        return "overrides", key
    if key in SCENARIO_KEYS:
        return "scenario", key
    raise UsageError(f"unknown setting {key!r}")


def apply_settings(raw: dict, settings: dict) -> dict:
    """Return a copy of the scenario tree with scenario keys and overrides replaced."""
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    for key, value in settings.items():
        where, name = route_key(key)
        if where == "overrides":
            data.setdefault("overrides", {})
            data["overrides"] = {**(data["overrides"] or {}), name: value}
        elif "." in name:
            group, sub = name.split(".", 1)
            data[group] = {**(data.get(group) or {}), sub: value}
        else:
            data[name] = value
    return data


def parse_seeds(text: str) -> list:
    """``A:B`` (half-open range) or a comma list."""
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            return list(range(int(lo), int(hi)))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad seed range {text!r}") from exc


def _settings(args) -> dict:
    out = dict(_split_assignment(s) for s in args.set or [])
    out = {k: parse_value(v) for k, v in out.items()}
    if getattr(args, "counting_mode", None):
        out["counting_mode"] = args.counting_mode
    return out


def _load(path: str, settings: dict):
    scenario = read_scenario(path)
    if settings:
        scenario = parse_scenario(apply_settings(scenario.raw, settings))
    return scenario


def _options(args, overrides: dict) -> RunOptions:
    return RunOptions(
        overrides=overrides,
        max_retries=args.max_retries,
        strict_phases=args.strict_phases,
        redraw_counts_on_retry=args.redraw_counts,
    )


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _structured(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


def _single_run(args):
    if len(args.scenario) != 1:
        raise UsageError(f"{args.command} takes exactly one --scenario")
    scenario = _load(args.scenario[0], _settings(args))
    seed = args.seed if args.seed is not None else scenario.seed
    seed = new_seed() if seed is None else seed
    report = run_full(scenario.spec, _options(args, scenario.overrides), seed=seed)
    if report.status == "error":
        raise UsageError("; ".join(report.errors))
    return report


def _audit_exit(report) -> int:
    audit = report.audit or {"passed": True}
    if not audit["passed"]:
        failed = [r["name"] for r in audit["records"] if r["kind"] == "hard" and not r["passed"]]
        print(f"audit failure: {', '.join(failed)}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def cmd_run(args) -> int:
    report = _single_run(args)
    if args.format == "csv":
        _emit(rows_to_csv(report.audit["records"], AUDIT_COLUMNS), args.out)
    else:
        _emit(report.to_json() + "\n", args.out)
    return _audit_exit(report)


def cmd_audit(args) -> int:
    report = _single_run(args)
    records = report.audit["records"]
    if args.format == "csv":
        _emit(rows_to_csv(records, AUDIT_COLUMNS), args.out)
    else:
        _emit(_structured({"seed": report.seed, "status": report.status, "audit": report.audit}), args.out)
    return _audit_exit(report)


def cmd_profile(args) -> int:
    report = _single_run(args)
    art = report.artifacts
    if art.stage1 is None:
        print("post-selection failed on every attempt; profiling the pre-measurement state",
              file=sys.stderr)
        from .state import QuantumState
        import numpy as np

        low = art.pre_measurement.amplitudes[: art.spec.N]
        state = QuantumState(low / np.linalg.norm(low))
    else:
        state = art.stage1
    rows = sorted_profile(state, art.spec, art.bank, art.schedule)
    if args.format == "structured":
        _emit(_structured({"seed": report.seed, "scenario": report.scenario, "profile": rows}), args.out)
    else:
        _emit(rows_to_csv(rows, PROFILE_COLUMNS), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    settings = _settings(args)
    grid_over, grid_scn = {}, {}
    for item in args.grid or []:
        key, value = _split_assignment(item)
        values = [parse_value(v) for v in value.split(",") if v.strip()]
        if not values:
            raise UsageError(f"grid key {key!r} has no values")
        where, name = route_key(key)
        (grid_over if where == "overrides" else grid_scn)[name if where == "overrides" else key] = values

    from .analysis import expand_grid

    scenarios = []
    for path in args.scenario:
        base = _load(path, settings)
        for point in expand_grid(grid_scn):
            if point:
                variant = parse_scenario(apply_settings(base.raw, point))
                label = ";".join(f"{k}={point[k]}" for k in sorted(point))
                scenarios.append((f"{variant.spec.name}[{label}]", variant.spec, variant.overrides))
            else:
                scenarios.append((base.spec.name, base.spec, base.overrides))
    seeds = parse_seeds(args.seeds) if args.seeds else [args.seed if args.seed is not None else new_seed()]
    if not args.scenario:
        rows = []
    else:
        rows = sweep(scenarios, seeds, grid_over, _options(args, {}))
    if args.format == "structured":
        _emit(_structured({"columns": list(SWEEP_COLUMNS), "rows": rows}), args.out)
    else:
        _emit(rows_to_csv(rows, SWEEP_COLUMNS), args.out)
    failed = [r for r in rows if r["audit_hard_failed"] not in ("", 0)]
    if failed:
        print(f"{len(failed)} of {len(rows)} rows have hard audit failures", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def cmd_trigcheck(args) -> int:
    try:
        records = verify_trig_inequalities(args.grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = [r.to_dict() for r in records]
    if args.format == "csv":
        _emit(rows_to_csv(rows, AUDIT_COLUMNS), args.out)
    else:
        _emit(_structured({"grid": args.grid, "records": rows}), args.out)
    return EXIT_OK if all(r.passed for r in records) else EXIT_AUDIT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gstateprep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_format):
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--format", choices=("structured", "csv"), default=default_format)
        p.add_argument("-v", "--verbose", action="count", default=0)

    def run_flags(p, multi=False):
        p.add_argument("--scenario", action="append", default=[], required=not multi,
                       help="scenario file (YAML)" + ("; repeatable" if multi else ""))
        p.add_argument("--seed", type=int)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a scenario key or parameter (dotted paths, e.g. params.epsilon=1/8)")
        p.add_argument("--max-retries", type=int, default=16)
        p.add_argument("--counting-mode", choices=("sampled", "exact"))
        p.add_argument("--strict-phases", action="store_true")
        p.add_argument("--redraw-counts", action="store_true",
                       help="redraw counting estimates when post-selection fails")

    for name, fn, fmt in (("run", cmd_run, "structured"), ("audit", cmd_audit, "structured"),
                          ("profile", cmd_profile, "csv")):
        p = sub.add_parser(name)
        run_flags(p)
        common(p, fmt)
        p.set_defaults(func=fn)

    p = sub.add_parser("sweep")
    run_flags(p, multi=True)
    p.add_argument("--seeds", help="A:B half-open range or comma list")
    p.add_argument("--grid", action="append", metavar="KEY=V1,V2,...")
    common(p, "csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trigcheck")
    p.add_argument("--grid", type=int, default=10_000, help="minimum number of grid points")
    common(p, "structured")
    p.set_defaults(func=cmd_trigcheck)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, GStatePrepError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
