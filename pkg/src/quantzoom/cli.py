"""Command-line entry point: ``quantzoom run|compare <scenario-file>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .scenario import (
    ENGINE_ERRORS,
    EXIT_BUDGET,
    EXIT_CONFIG,
    EXIT_ENGINE,
    EXIT_OK,
    ScenarioError,
    compare_modes,
    parse_scenario,
    run_scenario,
)

log = logging.getLogger("quantzoom")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantzoom",
        description="Distributed gradient descent over quantized directed networks with grid zooming.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run every trial of a scenario"),
                       ("compare", "compare zoom mode with a fixed finest grid")):
        p = sub.add_parser(name, help=text)
        p.add_argument("scenario", help="scenario file (key = value lines)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--trials", type=int, help="override the trial count")
        p.add_argument("--out-dir", help="override the output directory")
        p.add_argument("--mode", choices=("zoom", "static"), help="override the run mode")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        s = parse_scenario(args.scenario)
        overrides = {k: v for k, v in (("seed", args.seed), ("trials", args.trials),
                                       ("out_dir", args.out_dir), ("mode", args.mode)) if v is not None}
        if overrides.get("seed", 0) < 0 or overrides.get("trials", 1) < 1:
            raise ScenarioError("--seed must be >= 0 and --trials >= 1")
        s = replace(s, **overrides)
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "run":
            status = run_scenario(s)
            log.info("wrote %d trial(s) to %s", s.trials, s.out_dir)
        else:
            report = compare_modes(s, s.out_dir)
            print(json.dumps({k: v for k, v in report.items() if k not in ("trials", "config")}, indent=2))
            status = EXIT_OK if report["all_terminated"] else EXIT_BUDGET
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ENGINE_ERRORS as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    if status == EXIT_BUDGET:
        print("outer-step budget exhausted in at least one trial", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
