"""Command line interface.

Subcommands::

    followbot run <scenario> --out DIR [--seed N] [--override key=value ...]
    followbot metrics <run.json>
    followbot plotdata <run.json> --out DIR

``<scenario>`` is a bundled name or a JSON file path.  Exit codes: 0 on
success, 2 when the run ends in a fault, 1 on usage or schema errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .harness import (
    RunLog,
    ScenarioError,
    apply_overrides,
    compute_metrics,
    load_runlog,
    load_scenario,
    run,
    write_outputs,
)
from .scenarios import bundled_names, bundled_scenario


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="followbot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario and write outputs")
    p_run.add_argument("scenario", help=f"scenario path or one of {', '.join(bundled_names())}")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE",
        help="dotted scenario override, repeatable (e.g. modules.control.v_nominal=0.5)",
    )

    p_metrics = sub.add_parser("metrics", help="recompute metrics from a run.json")
    p_metrics.add_argument("runlog", help="path to run.json")

    p_plot = sub.add_parser("plotdata", help="re-export plot CSVs from a run.json")
    p_plot.add_argument("runlog", help="path to run.json")
    p_plot.add_argument("--out", required=True, help="output directory")
    return parser


def _scenario_dict(name_or_path: str) -> dict:
    if name_or_path in bundled_names():
        return bundled_scenario(name_or_path)
    with open(name_or_path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "run":
            data = _scenario_dict(args.scenario)
            if args.seed is not None:
                data["seed"] = args.seed
            apply_overrides(data, args.override)
            scenario = load_scenario(data)
            started = time.monotonic()
            log = run(scenario)
            elapsed = time.monotonic() - started
            write_outputs(log, args.out)
            print(f"{scenario.name}: status={log.status} steps={log.metrics['steps']} "
                  f"wall={elapsed:.2f}s -> {args.out}")
            print(json.dumps(log.metrics, indent=1))
            return 2 if log.status == "fault" else 0
        if args.command == "metrics":
            log = load_runlog(args.runlog)
            print(json.dumps(compute_metrics(log), indent=1))
            return 0
        if args.command == "plotdata":
            log = load_runlog(args.runlog)
            write_outputs(log, args.out)
            print(f"plot data written to {args.out}")
            return 0
    except (ScenarioError, json.JSONDecodeError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
