"""Command line interface: ``fsp-slam simulate|run|eval``"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from fsp_slam.pipeline.config import MODES, RunConfig
from fsp_slam.pipeline.report import print_summary
from fsp_slam.pipeline.run import evaluate_run, run_pipeline
from fsp_slam.simulator.sensors import simulate
from fsp_slam.simulator.specs import Scenario, default_scenario
from fsp_slam.utils.exceptions import ConfigError, FspSlamError
from fsp_slam.utils.log import logger


def get_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsp-slam",
        description="Monocular visual-inertial SLAM with rectangle landmarks",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    sim = subparsers.add_parser("simulate", help="Write the measurement log of a scenario")
    source = sim.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", type=Path, help="Scenario file (JSON)")
    source.add_argument(
        "--default",
        action="store_true",
        help="Use the built-in scenario. With --save-scenario, also write it.",
    )
    sim.add_argument("--out", type=Path, required=True, help="Measurement log (JSON lines)")
    sim.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    sim.add_argument("--save-scenario", type=Path, default=None, help="Write the scenario used")

    run = subparsers.add_parser("run", help="Estimate and evaluate")
    run.add_argument("--config", type=Path, default=None, help="Run configuration (YAML)")
    run.add_argument("--scenario", type=Path, default=None, help="Scenario file (JSON)")
    run.add_argument("--log", type=Path, default=None, help="Existing measurement log")
    run.add_argument("--mode", choices=MODES, default=None)
    run.add_argument("--out", type=Path, default=None, help="Run directory")
    run.add_argument(
        "--incremental",
        type=int,
        default=None,
        metavar="N",
        help="Optimize every N frames while building the graph",
    )
    run.add_argument("--omega0", type=float, default=None, help="Inverse depth seed (1/m)")
    run.add_argument("--seed", type=int, default=None, help="Override the scenario seed")

    ev = subparsers.add_parser("eval", help="Recompute the metrics of a run")
    ev.add_argument("--run", type=Path, required=True, help="Run directory")
    ev.add_argument("--plot", action="store_true", help="Also write figures")
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    d = {}
    if args.config is not None:
        d = RunConfig.from_yaml(args.config).to_dict()
    overrides = {
        key: getattr(args, key)
        for key in ("scenario", "log", "mode", "out", "incremental", "omega0", "seed")
        if getattr(args, key) is not None
    }
    d.update(overrides)
    return RunConfig.from_dict(d)


def _simulate(args: argparse.Namespace) -> int:
    scenario = default_scenario() if args.default else Scenario.load(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    if args.save_scenario is not None:
        scenario.save(args.save_scenario)
    simulate(scenario).save(args.out)
    logger.info("Wrote measurement log to %s", args.out)
    return 0


def _run(args: argparse.Namespace) -> int:
    reports = run_pipeline(_run_config(args))
    print_summary(reports)
    not_converged = [mode for mode, r in reports.items() if not r.converged]
    if not_converged:
        logger.error("Optimization did not converge for %s", ", ".join(not_converged))
        return 1
    return 0


def _eval(args: argparse.Namespace) -> int:
    if not args.run.is_dir():
        msg = f"Run directory {args.run} does not exist"
        raise ConfigError(msg)
    reports = evaluate_run(args.run)
    if not reports:
        msg = f"No reports found in {args.run}"
        raise ConfigError(msg)
    print_summary(reports)
    if args.plot:
        from fsp_slam.analysis.error_plots import plot_run

        for path in plot_run(args.run):
            logger.info("Wrote %s", path)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = get_parser().parse_args(argv)
    command = {"simulate": _simulate, "run": _run, "eval": _eval}[args.command]
    try:
        return command(args)
    except FspSlamError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
