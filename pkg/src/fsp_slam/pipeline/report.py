"""Run reports, metric tables and their CSV/JSON serialization."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from os import PathLike
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from fsp_slam.geometry.lie import Pose
from fsp_slam.metrics.landmark_errors import (
    FhpEstimate,
    FspEstimate,
    LandmarkEstimate,
    corner_errors,
    dim_errors,
)
from fsp_slam.metrics.pose_errors import relative_pose_error
from fsp_slam.metrics.summaries import summarize_frame
from fsp_slam.parameterization.fhp import FhpPoint
from fsp_slam.parameterization.fsp import FspRect
from fsp_slam.simulator.specs import WorldSpec
from fsp_slam.utils.dictionaries import to_builtins
from fsp_slam.utils.nomenclature import variable_manager as vm

#: Reproducible float formatting of all CSV outputs
FLOAT_FORMAT = "%.17g"

POSE_COLUMNS = ["t", "px", "py", "pz", "qw", "qx", "qy", "qz"]
FSP_PARAM_COLUMNS = ["u", "v", "omega", "w_bar", "f", "qw", "qx", "qy", "qz"]
FHP_PARAM_COLUMNS = ["u", "v", "omega"]


@dataclass
class RunReport:
    mode: str
    optimize: dict[str, Any]
    #: Median, mean and max of every metric
    metrics: dict[str, dict[str, float]]
    counters: dict[str, Any]
    low_parallax: list[int] = field(default_factory=list)
    unestimated: list[int] = field(default_factory=list)
    intermediate_solves: int = 0
    #: s
    wall_time: float = 0.0
    timings: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    omega0: float = 0.5
    version: str = ""
    commit: str = ""

    @property
    def converged(self) -> bool:
        return bool(self.optimize.get("converged", False))

    def to_dict(self) -> dict[str, Any]:
        return to_builtins(asdict(self))

    def save(self, path: str | PathLike) -> None:
        with Path(path).open("w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path: str | PathLike) -> RunReport:
        with Path(path).open() as f:
            return cls(**json.load(f))


# Tables
# ------


def pose_table(times: Sequence[float], poses: Sequence[Pose]) -> pd.DataFrame:
    return pd.DataFrame(
        [[t, *p.to_vector()] for t, p in zip(times, poses)], columns=POSE_COLUMNS
    )


def poses_from_table(df: pd.DataFrame) -> list[Pose]:
    return [Pose.from_vector(row) for row in df[POSE_COLUMNS[1:]].to_numpy()]


def relpose_table(
    est: Sequence[Pose], gt: Sequence[Pose], times: Sequence[float]
) -> pd.DataFrame:
    errors = relative_pose_error(est, gt, times)
    return pd.DataFrame(
        {
            "t": [e.t for e in errors],
            "trans_err_m": [e.translation for e in errors],
            "rot_err_rad": [e.rotation for e in errors],
        }
    )


def corner_table(
    estimates: Mapping[int, LandmarkEstimate],
    world: WorldSpec,
    object_ids: Sequence[int],
) -> pd.DataFrame:
    """One row per corner of every object in ``object_ids``; NaN errors for
    objects without estimate.
    """
    errors = {
        (e.object_id, e.corner): e.error
        for e in corner_errors(estimates, world, [i for i in object_ids if i in estimates])
    }
    rows = [
        (object_id, j, errors.get((object_id, j), np.nan))
        for object_id in object_ids
        for j in range(1, 5)
    ]
    return pd.DataFrame(rows, columns=["object_id", "corner_j", "err_m"])


def dims_table(
    estimates: Mapping[int, FspRect],
    world: WorldSpec,
    object_ids: Sequence[int],
) -> pd.DataFrame:
    errors = {
        e.object_id: e
        for e in dim_errors(estimates, world, [i for i in object_ids if i in estimates])
    }
    rows = []
    for object_id in object_ids:
        e = errors.get(object_id)
        if e is None:
            rows.append((object_id, np.nan, np.nan, np.nan, np.nan))
        else:
            rows.append((object_id, e.w_error, e.h_error, e.w_est, e.h_est))
    return pd.DataFrame(rows, columns=["object_id", "w_err_m", "h_err_m", "w_est", "h_est"])


def landmark_table(
    estimates: Mapping[int, LandmarkEstimate],
    anchor_frames: Mapping[int, int],
    mode: str,
) -> pd.DataFrame:
    """Landmark parameters with the frame index of their anchor pose"""
    rows = []
    for object_id, estimate in sorted(estimates.items()):
        anchor = anchor_frames[object_id]
        if isinstance(estimate, FspEstimate):
            rows.append([object_id, anchor, *estimate.rect.to_vector()])
        else:
            rows.extend(
                [object_id, j + 1, anchor, *point.to_vector()]
                for j, point in enumerate(estimate.points)
            )
    if mode == "fsp":
        columns = ["object_id", "anchor_frame", *FSP_PARAM_COLUMNS]
    else:
        columns = ["object_id", "corner_j", "anchor_frame", *FHP_PARAM_COLUMNS]
    return pd.DataFrame(rows, columns=columns)


def estimates_from_table(
    df: pd.DataFrame, poses: Sequence[Pose], mode: str
) -> dict[int, LandmarkEstimate]:
    """Inverse of `landmark_table`"""
    estimates: dict[int, LandmarkEstimate] = {}
    for object_id, group in df.groupby("object_id", sort=True):
        anchor = poses[int(group["anchor_frame"].iloc[0])]
        if mode == "fsp":
            rect = FspRect.from_vector(group[FSP_PARAM_COLUMNS].to_numpy()[0])
            estimates[int(object_id)] = FspEstimate(anchor, rect)
        else:
            group = group.sort_values("corner_j")
            points = [FhpPoint.from_vector(row) for row in group[FHP_PARAM_COLUMNS].to_numpy()]
            estimates[int(object_id)] = FhpEstimate([anchor] * len(points), points)
    return estimates


def metric_summaries(
    relpose: pd.DataFrame, corners: pd.DataFrame, dims: pd.DataFrame | None
) -> dict[str, dict[str, float]]:
    summaries = {
        **summarize_frame(relpose, ["trans_err_m", "rot_err_rad"]),
        **summarize_frame(corners, ["err_m"]),
    }
    if dims is not None:
        summaries.update(summarize_frame(dims, ["w_err_m", "h_err_m"]))
    return summaries


# Output
# ------


def write_csv(df: pd.DataFrame, path: str | PathLike) -> None:
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_csv(path: str | PathLike) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def print_summary(reports: Mapping[str, RunReport], console: Console | None = None) -> None:
    """Table of metric summaries, one column group per mode"""
    if console is None:
        console = Console()
    modes = list(reports)
    table = Table(title="Estimation errors")
    table.add_column("Metric")
    for mode in modes:
        for stat in ("median", "mean", "max"):
            table.add_column(f"{mode} {stat}", justify="right")
    metrics = sorted({m for r in reports.values() for m in r.metrics})
    for metric in metrics:
        cells = []
        for mode in modes:
            summary = reports[mode].metrics.get(metric)
            for stat in ("median", "mean", "max"):
                cells.append("" if summary is None else f"{summary[stat]:.3g}")
        table.add_row(vm[metric].label, *cells)
    for mode in modes:
        r = reports[mode]
        status = "converged" if r.converged else "[red]not converged[/red]"
        console.print(
            f"[bold]{mode}[/bold]: {status} after {r.optimize['iterations']} iterations, "
            f"final cost {r.optimize['final_cost']:.6g}, {r.wall_time:.1f} s"
        )
    console.print(table)
