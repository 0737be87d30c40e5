import dataclasses

import numpy as np
import pytest
from pytest import approx  # noqa: PT013

from fsp_slam.geometry.lie import Pose, Rotation
from fsp_slam.imu.preintegration import ImuBias, ImuNoise, ImuSample, preintegrate
from fsp_slam.imu.residual import (
    GRAVITY,
    bias_walk_information,
    bias_walk_residual,
    imu_ternary_covariance,
    imu_ternary_residual,
    predict_next_pose,
    propagate_pose,
)
from fsp_slam.simulator.sensors import synthesize_imu
from fsp_slam.simulator.specs import ImuSpec
from fsp_slam.simulator.trajectory import sample_trajectory
from fsp_slam.utils.exceptions import DegenerateInterval

from .factories import random_preintegrations


def hover_samples(t0: float, t1: float, n: int = 11) -> list[ImuSample]:
    return [ImuSample(t, -GRAVITY, np.zeros(3)) for t in np.linspace(t0, t1, n)]


@pytest.fixture()
def hover():
    pose = Pose([1.0, 2.0, 3.0], Rotation.identity())
    pre1 = preintegrate(hover_samples(0.0, 0.1), ImuBias.zero())
    pre2 = preintegrate(hover_samples(0.1, 0.2), ImuBias.zero())
    return pose, pre1, pre2


def test_stationary_equilibrium(hover):
    pose, pre1, pre2 = hover
    residual = imu_ternary_residual(pose, pose, pose, pre1, pre2, ImuBias.zero())
    assert residual.shape == (9,)
    assert residual == approx(np.zeros(9), abs=1e-12)


def test_position_perturbation(hover):
    pose, pre1, pre2 = hover
    eps = 1e-3
    moved = Pose(pose.translation + [eps, 0, 0], pose.rotation)
    residual = imu_ternary_residual(pose, pose, moved, pre1, pre2, ImuBias.zero())
    assert residual[:3] == approx(np.array([eps, 0.0, 0.0]), abs=1e-12)
    assert residual[3:] == approx(np.zeros(6), abs=1e-12)


def test_degenerate_interval(hover):
    pose, pre1, pre2 = hover
    empty = dataclasses.replace(pre2, t1=pre2.t0)
    with pytest.raises(DegenerateInterval, match="positive"):
        imu_ternary_residual(pose, pose, pose, pre1, empty, ImuBias.zero())
    with pytest.raises(DegenerateInterval, match="positive"):
        predict_next_pose(pose, pose, pre1, empty, ImuBias.zero())


def test_intervals_not_consecutive(hover):
    pose, pre1, _ = hover
    with pytest.raises(DegenerateInterval, match="consecutive"):
        imu_ternary_residual(pose, pose, pose, pre1, pre1, ImuBias.zero())
    with pytest.raises(DegenerateInterval, match="consecutive"):
        imu_ternary_covariance(pre1, pre1, pose.rotation, pose.rotation)


def _ground_truth(small_scenario, rate_hz: float = 200.0):
    trajectory = small_scenario.trajectory
    imu = ImuSpec(rate_hz=rate_hz, sigma_a=0.0, sigma_g=0.0)
    samples = synthesize_imu(
        trajectory, small_scenario.world.gravity, imu, np.random.default_rng(0)
    )
    per_frame = round(rate_hz / 10.0)
    n_frames = (len(samples) - 1) // per_frame + 1
    poses = [
        sample_trajectory(trajectory, samples[k * per_frame].t).pose
        for k in range(n_frames)
    ]
    pres = [
        preintegrate(
            samples[k * per_frame : (k + 1) * per_frame + 1], ImuBias.zero()
        )
        for k in range(n_frames - 1)
    ]
    return poses, pres


def test_zero_residual_at_ground_truth(small_scenario):
    poses, pres = _ground_truth(small_scenario)
    assert len(poses) == 41
    for k in range(2, len(poses)):
        residual = imu_ternary_residual(
            poses[k - 2], poses[k - 1], poses[k], pres[k - 2], pres[k - 1], ImuBias.zero()
        )
        assert np.max(np.abs(residual)) < 1e-6


def test_predict_next_pose_at_ground_truth(small_scenario):
    poses, pres = _ground_truth(small_scenario)
    for k in range(2, len(poses)):
        predicted = predict_next_pose(
            poses[k - 2], poses[k - 1], pres[k - 2], pres[k - 1], ImuBias.zero()
        )
        assert predicted.translation == approx(poses[k].translation, abs=1e-6)
        assert (predicted.rotation.inverse() @ poses[k].rotation).angle < 1e-6


def test_predicted_pose_zeroes_residual(rng):
    pre1, pre2 = random_preintegrations(rng)
    p_prev = Pose(rng.normal(size=3), Rotation.random(rng))
    p_mid = p_prev.boxplus(rng.normal(scale=0.1, size=6))
    bias = pre1.bias_ref
    predicted = predict_next_pose(p_prev, p_mid, pre1, pre2, bias)
    residual = imu_ternary_residual(p_prev, p_mid, predicted, pre1, pre2, bias)
    assert residual[:3] == approx(np.zeros(3), abs=1e-9)
    assert residual[6:] == approx(np.zeros(3), abs=1e-9)


def test_propagate_pose(small_scenario):
    trajectory = small_scenario.trajectory
    samples = synthesize_imu(
        trajectory,
        small_scenario.world.gravity,
        ImuSpec(rate_hz=200.0, sigma_a=0.0, sigma_g=0.0),
        np.random.default_rng(0),
    )
    pre = preintegrate(samples[:21], ImuBias.zero())
    start = sample_trajectory(trajectory, samples[0].t)
    end = sample_trajectory(trajectory, samples[20].t)
    pose, velocity = propagate_pose(start.pose, start.velocity, pre, ImuBias.zero())
    assert pose.translation == approx(end.pose.translation, abs=1e-6)
    assert velocity == approx(end.velocity, abs=1e-5)


def test_ternary_covariance_is_symmetric(rng):
    noise = ImuNoise(sigma_a=0.02, sigma_g=0.002)
    pre1 = preintegrate(hover_samples(0.0, 0.1), ImuBias.zero(), noise)
    pre2 = preintegrate(hover_samples(0.1, 0.2), ImuBias.zero(), noise)
    cov = imu_ternary_covariance(pre1, pre2, Rotation.random(rng), Rotation.random(rng))
    assert cov == approx(cov.T)
    assert np.all(np.linalg.eigvalsh(cov) > 0)


def test_bias_walk():
    a = ImuBias(b_a=[0.1, 0.0, 0.0])
    b = ImuBias(b_a=[0.3, 0.0, 0.0], b_g=[0.0, 0.01, 0.0])
    assert bias_walk_residual(a, b) == approx([0.2, 0, 0, 0, 0.01, 0])
    info = bias_walk_information(0.1, 1e-4, 1e-5)
    assert np.diag(info) == approx([1e9] * 3 + [1e11] * 3)
