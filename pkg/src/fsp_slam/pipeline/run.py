from __future__ import annotations

from pathlib import Path

import fsp_slam
from fsp_slam.factor_graph.optimizer import OptimizeReport, optimize, optimize_landmarks
from fsp_slam.pipeline.builder import GraphBuilder
from fsp_slam.pipeline.config import RunConfig
from fsp_slam.pipeline.report import (
    RunReport,
    corner_table,
    dims_table,
    estimates_from_table,
    landmark_table,
    metric_summaries,
    pose_table,
    poses_from_table,
    read_csv,
    relpose_table,
    write_csv,
)
from fsp_slam.simulator.measurement_log import MeasurementLog
from fsp_slam.simulator.sensors import simulate
from fsp_slam.simulator.specs import Scenario
from fsp_slam.utils.exceptions import SingularHessian, SolverError
from fsp_slam.utils.log import get_logger
from fsp_slam.utils.nomenclature import random_run_name
from fsp_slam.utils.timing import Timer, timing
from fsp_slam.utils.versioning import get_commit_hash

logger = get_logger("Pipeline")

#: Files written to the run directory
SCENARIO_FILE = "scenario.json"
LOG_FILE = "log.jsonl"
CONFIG_FILE = "run_config.yaml"


def _solve(builder: GraphBuilder, config: RunConfig) -> OptimizeReport:
    if config.refine_landmarks_first and builder.n_landmarks:
        optimize_landmarks(builder.graph, config.optimizer)
    return optimize(builder.graph, config.optimizer)


def build_and_solve(
    log: MeasurementLog, scenario: Scenario, config: RunConfig, mode: str
) -> tuple[GraphBuilder, OptimizeReport, int]:
    """Build the graph of one landmark mode and optimize it, incrementally if
    configured. Only the first frame's ground truth pose is used.

    Returns:
        Builder holding the optimized graph, report of the final solve and the
        number of intermediate solves (the initialization solve not included)

    Raises:
        SolverError
    """
    builder = GraphBuilder(scenario.sensors.camera, scenario.world.gravity, config, mode)
    n_intermediate = 0
    initialized = config.init_solve_frames is None
    for frame in log.frames:
        builder.add_frame(frame, log)
        n_added = builder.n_frames
        if n_added == log.n_frames or not builder.n_landmarks:
            continue
        if not initialized and n_added >= config.init_solve_frames:  # type: ignore[operator]
            try:
                _solve(builder, config)
            except SingularHessian as e:
                logger.debug("No initialization after %d frames: %s", n_added, e)
            else:
                logger.info("Initialized after %d frames", n_added)
                initialized = True
                continue
        if config.incremental is None or n_added % config.incremental:
            continue
        try:
            _solve(builder, config)
        except SingularHessian as e:
            logger.warning("Skipping the solve after %d frames: %s", n_added, e)
            continue
        n_intermediate += 1
    try:
        report = _solve(builder, config)
    except SingularHessian as e:
        msg = f"{mode} optimization failed: {e}"
        raise SolverError(msg) from e
    return builder, report, n_intermediate


def _counters(builder: GraphBuilder, report: OptimizeReport) -> dict:
    graph = builder.graph
    by_kind: dict[str, int] = {}
    for factor in graph.factors:
        name = type(factor).__name__
        by_kind[name] = by_kind.get(name, 0) + 1
    return {
        "frames": builder.n_frames,
        "variables": graph.n_variables,
        "factors": graph.n_factors,
        "factors_by_kind": by_kind,
        "dimension": graph.dimension(),
        "dimension_by_kind": graph.dimension_by_kind(),
        "landmarks": builder.n_landmarks,
        "behind_camera_evaluations": report.behind_camera_evaluations,
        "outlier_factors": len(report.outlier_factors),
    }


def run_mode(
    log: MeasurementLog,
    scenario: Scenario,
    config: RunConfig,
    mode: str,
    out: Path,
) -> RunReport:
    """Estimate, evaluate and write the outputs of one landmark mode"""
    timer = Timer()
    timings: dict[str, float] = {}
    with timing(f"{mode} estimation", logger, timings):
        builder, report, n_intermediate = build_and_solve(log, scenario, config, mode)

    poses = builder.estimated_poses()
    times = builder.times
    object_ids = log.object_ids
    estimates = builder.landmark_estimates()
    anchors = {i: t.anchor_frame for i, t in builder.tracks.items()}
    poses_df = pose_table(times, poses)
    relpose_df = relpose_table(poses, log.ground_truth_poses(), times)
    corners_df = corner_table(estimates, scenario.world, object_ids)
    dims_df = dims_table(builder.fsp_estimates(), scenario.world, object_ids) if mode == "fsp" else None

    write_csv(poses_df, out / f"poses_{mode}.csv")
    write_csv(relpose_df, out / f"relpose_{mode}.csv")
    write_csv(corners_df, out / f"corners_{mode}.csv")
    write_csv(landmark_table(estimates, anchors, mode), out / f"landmarks_{mode}.csv")
    if dims_df is not None:
        write_csv(dims_df, out / "dims_fsp.csv")

    unestimated = builder.unestimated()
    if unestimated:
        logger.warning("%s: objects %s could not be estimated", mode, unestimated)
    run_report = RunReport(
        mode=mode,
        optimize=report.to_dict(),
        metrics=metric_summaries(relpose_df, corners_df, dims_df),
        counters=_counters(builder, report),
        low_parallax=builder.low_parallax(config.min_frames_for_parallax),
        unestimated=unestimated,
        intermediate_solves=n_intermediate,
        wall_time=timer.total,
        timings=timings,
        seed=scenario.seed,
        omega0=config.omega0,
        version=fsp_slam.__version__,
        commit=get_commit_hash(),
    )
    run_report.save(out / f"report_{mode}.json")
    return run_report


def prepare_run_dir(config: RunConfig) -> Path:
    out = config.out
    if out is None:
        out = Path("runs") / random_run_name()
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_pipeline(config: RunConfig) -> dict[str, RunReport]:
    """Simulate (or load) the measurements, then estimate and evaluate every
    configured landmark mode on the same log.

    Returns:
        Reports by mode

    Raises:
        ConfigError, SolverError
    """
    scenario = Scenario.load(config.scenario)
    if config.seed is not None:
        scenario.seed = config.seed
    out = prepare_run_dir(config)
    if config.log is not None:
        log = MeasurementLog.load(config.log)
    else:
        log = simulate(scenario)
    log.save(out / LOG_FILE)
    scenario.save(out / SCENARIO_FILE)
    config.save_yaml(out / CONFIG_FILE)
    logger.info("Writing outputs to %s", out)
    return {mode: run_mode(log, scenario, config, mode, out) for mode in config.modes}


def evaluate_run(run_dir: str | Path) -> dict[str, RunReport]:
    """Recompute the metric tables of a finished run from its pose and landmark
    outputs and update its reports.
    """
    run_dir = Path(run_dir)
    scenario = Scenario.load(run_dir / SCENARIO_FILE)
    log = MeasurementLog.load(run_dir / LOG_FILE)
    reports = {}
    for mode in ("fsp", "fhp"):
        report_path = run_dir / f"report_{mode}.json"
        if not report_path.exists():
            continue
        poses_df = read_csv(run_dir / f"poses_{mode}.csv")
        poses = poses_from_table(poses_df)
        estimates = estimates_from_table(read_csv(run_dir / f"landmarks_{mode}.csv"), poses, mode)
        relpose_df = relpose_table(poses, log.ground_truth_poses(), poses_df["t"].tolist())
        corners_df = corner_table(estimates, scenario.world, log.object_ids)
        dims_df = None
        if mode == "fsp":
            rects = {i: e.rect for i, e in estimates.items()}  # type: ignore[union-attr]
            dims_df = dims_table(rects, scenario.world, log.object_ids)
            write_csv(dims_df, run_dir / "dims_fsp.csv")
        write_csv(relpose_df, run_dir / f"relpose_{mode}.csv")
        write_csv(corners_df, run_dir / f"corners_{mode}.csv")
        report = RunReport.load(report_path)
        report.metrics = metric_summaries(relpose_df, corners_df, dims_df)
        report.save(report_path)
        reports[mode] = report
    return reports
