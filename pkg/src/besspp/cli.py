"""Command-line entry point.

Subcommands map one-to-one onto the study drivers:

* ``design``   - sparse-layer design plus the ladder-ratio sweep
* ``tradeoff`` - utilization versus normalized converter rating
* ``day``      - one exemplar plaza day per architecture kind
* ``ensemble`` - dispersion statistics and the stochastic service sweep
* ``validate`` - parse the scenario and structurally check every network

Exit codes: 0 on success, 1 for configuration problems (bad scenario file,
bad arguments, failed validation), 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import besspp
from besspp.scenario import Scenario, ScenarioError, default_scenario, load_scenario
from besspp.studies import (
    run_day,
    run_design,
    run_ensemble,
    run_tradeoff,
    validate_scenario,
)

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="besspp",
        description=(
            "Design and evaluate partial power processing architectures "
            "for second-use battery storage."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {besspp.__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, needs_out: bool = True) -> None:
        p.add_argument(
            "--scenario",
            type=Path,
            default=None,
            help="scenario JSON file (default: the built-in scenario)",
        )
        p.add_argument(
            "--seed",
            type=int,
            default=None,
            help="override the scenario seed",
        )
        if needs_out:
            p.add_argument(
                "--workers",
                type=int,
                default=1,
                help="worker processes for independent sweep points",
            )
            p.add_argument(
                "--out",
                type=Path,
                required=True,
                help="output directory for study artifacts",
            )

    add_common(sub.add_parser("design", help="design the sparse layer"))
    add_common(sub.add_parser("tradeoff", help="utilization vs rating sweep"))
    day = sub.add_parser("day", help="simulate one exemplar plaza day")
    add_common(day)
    day.add_argument(
        "--kind",
        action="append",
        default=None,
        help="architecture kind to simulate (repeatable; default: all)",
    )
    add_common(sub.add_parser("ensemble", help="stochastic plaza ensemble"))
    add_common(sub.add_parser("validate", help="check a scenario"), needs_out=False)
    return parser


def _load(args) -> Scenario:
    scenario = (
        load_scenario(args.scenario)
        if args.scenario is not None
        else default_scenario()
    )
    if args.seed is not None:
        if args.seed < 0:
            raise ScenarioError("--seed must be nonnegative")
        scenario = Scenario(
            **{
                **{f: getattr(scenario, f) for f in scenario.__dataclass_fields__},
                "seed": args.seed,
            }
        )
    return scenario


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scenario = _load(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "validate":
            problems = validate_scenario(scenario)
            if problems:
                for problem in problems:
                    print(f"invalid: {problem}", file=sys.stderr)
                return EXIT_CONFIG
            print(f"scenario '{scenario.name}' is valid")
            return EXIT_OK

        workers = max(1, args.workers)
        if args.command == "design":
            result = run_design(scenario, args.out, workers)
        elif args.command == "tradeoff":
            result = run_tradeoff(scenario, args.out, workers)
        elif args.command == "day":
            try:
                result = run_day(scenario, args.out, workers, kinds=args.kind)
            except ValueError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
        else:
            result = run_ensemble(scenario, args.out, workers)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    for name in result.files:
        print(result.out_dir / name)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
