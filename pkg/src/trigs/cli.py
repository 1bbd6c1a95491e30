"""Command-line entry point: ``trigs <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .diagnostics import rate_fit
from .objectives import PROBLEMS
from .schedules import Certificate, admissible_K_range, cd_check, parse_schedule


def _check_schedule(args) -> int:
    sch = parse_schedule(args.schedule, args.t1)
    cert = Certificate(args.delta, args.K, args.t1)
    lo, hi = admissible_K_range(args.delta)
    verdict = cd_check(sch, cert, args.horizon)
    out = {
        "schedule": sch.spec(),
        "delta": args.delta,
        "K": args.K,
        "t1": args.t1,
        "horizon": args.horizon,
        "admissible_K": [lo, hi],
        "slope_bound": cert.slope_bound,
        "satisfied": verdict.satisfied,
        "nonincreasing": verdict.nonincreasing,
        "margin": verdict.margin,
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0 if verdict.satisfied else 1


def _print_report(report: harness.RunReport) -> None:
    status = "PASS" if report.passed else "FAIL"
    print(f"[{status}] {report.config.name} ({report.wall_time:.2f} s)")
    if report.error:
        print(f"  error: {report.error}")
    for w in report.config.warnings:
        print(f"  warning: {w}")
    for a in report.assertions:
        print(f"  {'ok  ' if a.passed else 'FAIL'} {a.assertion}: measured {a.measured!r}, margin {a.margin!r}")


def _emit(report, out):
    if out is not None:
        for path in harness.emit(report, out, report.config.output["formats"]):
            print(f"  wrote {path}")


def _run(args) -> int:
    cfg = harness.load_config(args.config)
    report = harness.run(cfg)
    _print_report(report)
    _emit(report, args.out or cfg.output.get("dir"))
    return 0 if report.passed else 1


def _sweep(args) -> int:
    paths = sorted(Path(args.config_dir).glob("*.cfg"))
    configs = [harness.load_config(p) for p in paths]
    reports = harness.sweep(configs, args.threads)
    for r in reports:
        _print_report(r)
        _emit(r, args.out or r.config.output.get("dir"))
    print(f"{sum(r.passed for r in reports)}/{len(reports)} runs passed")
    return 0 if all(r.passed for r in reports) else 1


def _fit_rate(args) -> int:
    with open(args.input, newline="") as fh:
        reader = csv.DictReader(fh)
        if args.column not in (reader.fieldnames or []):
            raise ValueError(f"column {args.column!r} not in {reader.fieldnames}")
        xcol = args.x_column or reader.fieldnames[0]
        rows = [(float(r[xcol]), float(r[args.column])) for r in reader]
    t, y = np.array(rows).T if rows else (np.array([]), np.array([]))
    rep = rate_fit(t, y, args.window, args.log_correction, quantity=args.column)
    print(json.dumps(harness._clean(rep.to_json()), indent=2, sort_keys=True))
    return 0


def _list_problems(args) -> int:
    for key, desc in PROBLEMS.items():
        print(f"{key:16s} {desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trigs", description="Tikhonov-regularized inertial dynamics and algorithms.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check-schedule", help="check the controlled-decay condition for a schedule")
    c.add_argument("--schedule", required=True, help="e.g. rational:M=0.2,C=0")
    c.add_argument("--delta", type=float, required=True)
    c.add_argument("--K", type=float, required=True)
    c.add_argument("--t1", type=float, default=1.0)
    c.add_argument("--horizon", type=float, default=1e4)
    c.set_defaults(func=_check_schedule)

    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory for CSV/JSON")
    r.set_defaults(func=_run)

    s = sub.add_parser("sweep", help="run every *.cfg in a directory")
    s.add_argument("--config-dir", required=True)
    s.add_argument("--out")
    s.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${harness.THREADS_ENV} or 1)")
    s.set_defaults(func=_sweep)

    f = sub.add_parser("fit-rate", help="fit a log-log slope to a CSV column")
    f.add_argument("--input", required=True)
    f.add_argument("--column", required=True)
    f.add_argument("--x-column", help="abscissa column (default: first column)")
    f.add_argument("--window", type=float, default=0.5)
    f.add_argument("--log-correction", action="store_true")
    f.set_defaults(func=_fit_rate)

    lp = sub.add_parser("list-problems", help="list registered problem specs")
    lp.set_defaults(func=_list_problems)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
