"""Command line entry point."""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import GLDualError
from .harness import THREADS_ENV, run_scenario
from .report import emit, to_json

__all__ = ["main", "build_parser"]


def _values(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gldual",
        description="Verify primal-dual claims for a discrete Ginzburg-Landau energy.",
        epilog=f"Set {THREADS_ENV} to the number of worker threads used by sweeps.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the task named in a config file")
    run.add_argument("config")
    run.add_argument("--out", help="write the JSON report here (default: stdout)")
    run.add_argument("--csv", help="write the report's row table as CSV")
    run.add_argument("--seed", type=int, help="override the config seed")

    sweep = sub.add_parser("sweep", help="repeat the config's sweep_task over parameter values")
    sweep.add_argument("config")
    sweep.add_argument("--param", required=True)
    sweep.add_argument("--values", required=True, type=_values)
    sweep.add_argument("--out")
    sweep.add_argument("--csv")
    sweep.add_argument("--seed", type=int)

    check = sub.add_parser("check", help="run the built-in acceptance suite")
    check.add_argument("--only", type=int, action="append", help="run only this criterion (repeatable)")
    return p


def _run(args) -> int:
    try:
        s = load_config(args.config)
        if args.seed is not None:
            s = s.with_seed(args.seed)
        if args.command == "sweep":
            s = s.with_sweep(args.param, args.values)
    except (GLDualError, OSError) as exc:
        print(f"gldual: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    report = run_scenario(s)
    if args.out:
        emit(report, "json", args.out)
    else:
        sys.stdout.write(to_json(report))
    if args.csv:
        emit(report, "csv", args.csv)
    for v in report.verdicts:
        if not v.passed:
            print(f"FAIL {v.name}: {v.value!r} {v.relation} {v.threshold!r} {v.note}".rstrip(),
                  file=sys.stderr)
    return 0 if report.passed else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check":
        from .acceptance import run_all

        results = run_all(only=args.only)
        return 0 if all(r.passed for r in results) else 1
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
