"""Command line front end.

Exit codes: 0 every check passed, 1 a property violation or failure
witness, 2 undetermined, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import FiberBunchError
from .report import digest, emit_report
from .scenario import TASKS, ScenarioError, parse_scenario, run_task

EXIT_INPUT = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fiberbunch",
                                     description="Fiber bunching, holonomies and cocycle conjugacies over shifts.")
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task)
        p.add_argument("--scenario", required=True, type=Path, help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None, help="overrides the scenario seed")
        p.add_argument("--workers", type=int, default=1, help="thread count; never changes results")
        p.add_argument("--out", type=Path, default=Path("report"), help="output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    seed = args.seed if args.seed is not None else 0
    try:
        raw = args.scenario.read_bytes()
    except OSError as exc:
        print(f"error: scenario: {exc}", file=sys.stderr)
        return EXIT_INPUT
    scenario_digest = digest(raw)
    try:
        if args.workers < 1:
            raise ScenarioError("--workers", "must be at least 1")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ScenarioError("--seed", "must be an unsigned 64-bit integer")
        try:
            data = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ScenarioError("scenario", f"not valid JSON ({exc})") from exc
        sc = parse_scenario(data)
        if args.seed is not None:
            sc.seed = args.seed
        seed = sc.seed
        result = run_task(args.task, sc, args.workers)
    except (ScenarioError, FiberBunchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        try:
            emit_report(args.out, args.task, scenario_digest, seed, EXIT_INPUT, [], error=str(exc))
        except OSError:
            pass
        return EXIT_INPUT
    try:
        emit_report(args.out, args.task, scenario_digest, seed, result.exit_code,
                    result.checks, result.results, result.tables)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for c in result.checks:
        print(f"{c['status']:>12}  {c['name']}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
