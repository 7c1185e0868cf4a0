"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 config or artifact problem,
4 at least one run diverged.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from ..errors import QsaError
from ..gfo import BUILTIN_OBJECTIVES, builtin_objective
from .config import load_config
from .runner import analyze_dir, run_experiment

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_DIVERGED = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsalab",
        description="Deterministic-probing stochastic approximation harness",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap worker processes (1 runs inline)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment config")
    run.add_argument("--config", required=True, help="config file path")
    run.add_argument("--out", default=None, help="output root directory")
    run.add_argument("--runs", type=int, default=None, help="override run count")
    run.add_argument("--seed", type=int, default=None,
                     help="override master seed")

    val = sub.add_parser("validate", help="parse and validate a config")
    val.add_argument("--config", required=True, help="config file path")

    ana = sub.add_parser("analyze",
                         help="recompute summary.json from stored CSVs")
    ana.add_argument("--in", dest="in_dir", required=True,
                     help="experiment output directory")

    sub.add_parser("list-objectives", help="list built-in objectives")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(Path(args.config))
    if args.runs is not None:
        if args.runs < 1:
            print("--runs must be >= 1", file=sys.stderr)
            return EXIT_USAGE
        cfg = dataclasses.replace(cfg, runs=args.runs)
    if args.seed is not None:
        if args.seed < 0:
            print("--seed must be >= 0", file=sys.stderr)
            return EXIT_USAGE
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    stem = Path(args.config).stem
    out_dir, summaries = run_experiment(
        cfg, stem, out_root=args.out, threads=args.threads
    )
    diverged = sum(1 for s in summaries if s.diverged)
    print(f"wrote {out_dir} ({len(summaries)} runs, {diverged} diverged)")
    return EXIT_DIVERGED if diverged else EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(Path(args.config))
    print(f"{args.config}: valid {cfg.kind} experiment, {cfg.runs} runs")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    summary = analyze_dir(args.in_dir)
    diverged = sum(1 for entry in summary["runs"] if entry["diverged"])
    print(f"rewrote {Path(args.in_dir) / 'summary.json'}"
          f" ({len(summary['runs'])} runs, {diverged} diverged)")
    return EXIT_OK


def _cmd_list_objectives(args) -> int:
    for name in BUILTIN_OBJECTIVES:
        try:
            obj = builtin_objective(name, 2)
            dims = "any dimension"
        except QsaError:
            obj = None
            dims = "unavailable"
        try:
            builtin_objective(name, 3)
        except QsaError:
            if obj is not None:
                dims = "dimension 2 only"
        print(f"{name}: {dims}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    handlers = {
        "run": _cmd_run,
        "validate": _cmd_validate,
        "analyze": _cmd_analyze,
        "list-objectives": _cmd_list_objectives,
    }
    try:
        return handlers[args.command](args)
    except (QsaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
