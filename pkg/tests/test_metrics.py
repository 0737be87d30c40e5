import numpy as np
import pandas as pd
import pytest
from pytest import approx  # noqa: PT013

from fsp_slam.geometry.lie import Pose, Rotation
from fsp_slam.metrics.landmark_errors import (
    FhpEstimate,
    FspEstimate,
    corner_errors,
    dim_errors,
)
from fsp_slam.metrics.pose_errors import relative_pose_error
from fsp_slam.metrics.summaries import summarize, summarize_frame
from fsp_slam.parameterization.fhp import FhpPoint
from fsp_slam.parameterization.fsp import FspRect, fsp_corners_world, fsp_dims
from fsp_slam.pipeline.report import metric_summaries
from fsp_slam.simulator.specs import RectObject, WorldSpec
from fsp_slam.utils.exceptions import LengthMismatch, MissingLandmark

from .factories import random_fsp, random_pose


def random_trajectory(rng, n: int = 10) -> list[Pose]:
    poses = [random_pose(rng)]
    for _ in range(n - 1):
        poses.append(poses[-1].boxplus(rng.normal(scale=0.1, size=6)))
    return poses


def world_of(anchor: Pose, rect: FspRect, object_id: int = 0) -> WorldSpec:
    """Ground truth world containing exactly the given rectangle"""
    corners = fsp_corners_world(anchor, rect)
    x = corners[1] - corners[0]
    y = corners[3] - corners[0]
    x /= np.linalg.norm(x)
    y /= np.linalg.norm(y)
    dims = fsp_dims(rect)
    obj = RectObject(
        id=object_id,
        position=corners[0],
        orientation=Rotation.from_matrix(np.column_stack([x, y, np.cross(x, y)])),
        w=dims.w,
        h=dims.h,
    )
    return WorldSpec([obj])


def test_relpose_identical(rng):
    poses = random_trajectory(rng)
    errors = relative_pose_error(poses, poses)
    assert len(errors) == 9
    for e in errors:
        assert e.translation == approx(0.0, abs=1e-12)
        assert e.rotation == approx(0.0, abs=1e-7)


def test_relpose_gauge_invariance(rng):
    gt = random_trajectory(rng)
    est = [p.boxplus(rng.normal(scale=0.01, size=6)) for p in gt]
    transform = random_pose(rng)
    moved = [transform @ p for p in est]
    for a, b in zip(relative_pose_error(est, gt), relative_pose_error(moved, gt)):
        assert a.translation == approx(b.translation, abs=1e-12)
        assert a.rotation == approx(b.rotation, abs=1e-7)


def test_relpose_single_offset():
    gt = [Pose.identity(), Pose([1.0, 0.0, 0.0], Rotation.identity())]
    est = [Pose.identity(), Pose([1.01, 0.0, 0.0], Rotation.identity())]
    (error,) = relative_pose_error(est, gt, times=[0.0, 0.1])
    assert error.translation == approx(0.01)
    assert error.rotation == approx(0.0)
    assert error.t == 0.1


def test_relpose_length_mismatch(rng):
    poses = random_trajectory(rng)
    with pytest.raises(LengthMismatch):
        relative_pose_error(poses, poses[:-1])
    with pytest.raises(LengthMismatch):
        relative_pose_error(poses, poses, times=[0.0])


def test_corner_errors_exact_and_offset(rng):
    anchor = random_pose(rng)
    rect = random_fsp(rng)
    world = world_of(anchor, rect)
    errors = corner_errors({0: FspEstimate(anchor, rect)}, world)
    assert [e.corner for e in errors] == [1, 2, 3, 4]
    assert max(e.error for e in errors) < 1e-9
    delta = np.array([0.01, -0.02, 0.005])
    shifted = Pose(anchor.translation + delta, anchor.rotation)
    errors = corner_errors({0: FspEstimate(shifted, rect)}, world)
    for e in errors:
        assert e.error == approx(np.linalg.norm(delta))


def test_corner_errors_brute_force(rng):
    for _ in range(20):
        anchor = random_pose(rng)
        rect = random_fsp(rng)
        world = world_of(anchor, rect)
        estimate = rect.boxplus(rng.normal(scale=0.01, size=8))
        # corners built by hand from the parameters
        R_F = anchor.rotation.matrix
        R_FO = estimate.rel_orientation.matrix
        w_bar, h_bar = estimate.w_bar, estimate.w_bar / estimate.form_factor
        ray = np.array([*estimate.ray, 1.0])
        expected = []
        for s in [(0, 0), (w_bar, 0), (w_bar, h_bar), (0, h_bar)]:
            p = ray + R_FO @ np.array([s[0], s[1], 0.0])
            corner = anchor.translation + R_F @ p / estimate.omega
            expected.append(np.linalg.norm(corner - world.objects[0].corners_world()[len(expected)]))
        errors = corner_errors({0: FspEstimate(anchor, estimate)}, world)
        assert [e.error for e in errors] == approx(expected, abs=1e-12)


def test_corner_errors_fhp(rng):
    anchor = random_pose(rng)
    rect = random_fsp(rng)
    world = world_of(anchor, rect, object_id=4)
    truth = world.objects[0].corners_world()
    points = []
    for corner in truth:
        p = anchor.inverse().apply(corner)
        points.append(FhpPoint(ray=p[:2] / p[2], omega=1.0 / p[2]))
    estimate = FhpEstimate([anchor] * 4, points)
    errors = corner_errors({4: estimate}, world)
    assert max(e.error for e in errors) < 1e-9


def test_missing_landmark(rng):
    anchor = random_pose(rng)
    rect = random_fsp(rng)
    world = world_of(anchor, rect)
    with pytest.raises(MissingLandmark):
        corner_errors({0: FspEstimate(anchor, rect)}, world, object_ids=[0, 1])
    with pytest.raises(MissingLandmark):
        corner_errors({3: FspEstimate(anchor, rect)}, world)
    with pytest.raises(MissingLandmark):
        dim_errors({}, world, object_ids=[0])


def test_dim_errors(rng):
    anchor = random_pose(rng)
    rect = random_fsp(rng)
    world = world_of(anchor, rect)
    (exact,) = dim_errors({0: rect}, world)
    assert exact.w_error == approx(0.0, abs=1e-12)
    assert exact.h_error == approx(0.0, abs=1e-12)
    doubled = FspRect(
        rect.ray, 2 * rect.omega, 2 * rect.w_bar, rect.form_factor, rect.rel_orientation
    )
    (scaled,) = dim_errors({0: doubled}, world)
    assert scaled.w_error == approx(0.0, abs=1e-12)
    wider = FspRect(
        rect.ray, rect.omega, 1.01 * rect.w_bar, rect.form_factor, rect.rel_orientation
    )
    (error,) = dim_errors({0: wider}, world)
    assert error.w_error == approx(0.01 * world.objects[0].w)
    assert error.w_est == approx(1.01 * world.objects[0].w)


def test_dim_errors_do_not_depend_on_anchor(rng):
    anchor = random_pose(rng)
    rect = random_fsp(rng)
    world = world_of(anchor, rect)
    rotated = rect.boxplus(np.r_[0.05, -0.05, 0.0, 0.0, 0.0, 0.3, 0.2, 0.1])
    assert dim_errors({0: rotated}, world) == dim_errors({0: rect}, world)


def test_summarize():
    s = summarize([1.0, 2.0, 6.0, float("nan")])
    assert s == {"median": 2.0, "mean": 3.0, "max": 6.0, "count": 3}
    empty = summarize([])
    assert np.isnan(empty["median"])
    assert empty["count"] == 0
    df = pd.DataFrame({"a": [1.0, 3.0], "b": [2.0, 2.0]})
    assert summarize_frame(df, ["a"]) == {"a": summarize([1.0, 3.0])}


def test_metric_summaries():
    relpose = pd.DataFrame({"trans_err_m": [0.1, 0.3], "rot_err_rad": [0.01, 0.03]})
    corners = pd.DataFrame({"err_m": [0.2, float("nan")]})
    summaries = metric_summaries(relpose, corners, None)
    assert list(summaries) == ["trans_err_m", "rot_err_rad", "err_m"]
    assert summaries["trans_err_m"]["median"] == approx(0.2)
    assert summaries["err_m"]["count"] == 1
    dims = pd.DataFrame({"w_err_m": [0.01], "h_err_m": [0.02]})
    assert metric_summaries(relpose, corners, dims)["h_err_m"]["max"] == approx(0.02)
