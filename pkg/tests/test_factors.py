from collections.abc import Callable

import numpy as np
import pytest
from pytest import approx  # noqa: PT013

from fsp_slam.factor_graph.factors import (
    BiasPriorFactor,
    BiasWalkFactor,
    Factor,
    FhpReprojectionFactor,
    FspReprojectionFactor,
    ImuTernaryFactor,
    PosePriorFactor,
    numerical_jacobian,
)
from fsp_slam.factor_graph.variables import VariableId, VariableKind
from fsp_slam.geometry.lie import Pose
from fsp_slam.parameterization.fhp import fhp_project
from fsp_slam.parameterization.fsp import fsp_project_all

from .factories import (
    nearby_pose,
    random_bias,
    random_fhp,
    random_fsp,
    random_pose,
    random_preintegrations,
)

POSE_A = VariableId(0, VariableKind.POSE)
POSE_B = VariableId(1, VariableKind.POSE)
POSE_C = VariableId(2, VariableKind.POSE)
FSP = VariableId(3, VariableKind.FSP)
FHP = VariableId(4, VariableKind.FHP)
BIAS_A = VariableId(5, VariableKind.BIAS)
BIAS_B = VariableId(6, VariableKind.BIAS)


def assert_jacobians_match(factor: Factor, values) -> None:
    residual, analytic = factor.linearize(values)
    assert residual == approx(factor.residual(values))
    numerical = numerical_jacobian(factor, values)
    assert len(analytic) == len(numerical) == len(factor.variables)
    for var, ja, jn in zip(factor.variables, analytic, numerical):
        assert ja.shape == (factor.dim, var.kind.dim)
        assert np.linalg.norm(ja - jn) <= 1e-5 * max(np.linalg.norm(jn), 1.0), var


def fsp_case(rng, K, *, same_camera: bool):
    anchor = random_pose(rng)
    camera = anchor if same_camera else nearby_pose(rng, anchor)
    rect = random_fsp(rng)
    measurement = fsp_project_all(K, camera, anchor, rect) + rng.normal(size=(4, 2))
    camera_id = POSE_B if not same_camera else POSE_A
    factor = FspReprojectionFactor(camera_id, POSE_A, FSP, measurement, K, np.eye(8))
    return factor, [camera, anchor, rect]


def fhp_case(rng, K, *, same_camera: bool):
    anchor = random_pose(rng)
    camera = anchor if same_camera else nearby_pose(rng, anchor)
    point = random_fhp(rng)
    measurement = fhp_project(K, camera, anchor, point).as_array() + rng.normal(size=2)
    camera_id = POSE_B if not same_camera else POSE_A
    factor = FhpReprojectionFactor(camera_id, POSE_A, FHP, measurement, K, np.eye(2))
    return factor, [camera, anchor, point]


def imu_case(rng, K):
    pre1, pre2 = random_preintegrations(rng)
    p_prev = random_pose(rng)
    p_mid = nearby_pose(rng, p_prev)
    p_next = nearby_pose(rng, p_mid)
    bias = pre1.bias_ref.boxplus(rng.normal(scale=1e-3, size=6))
    factor = ImuTernaryFactor((POSE_A, POSE_B, POSE_C), BIAS_A, pre1, pre2, np.eye(9))
    return factor, [p_prev, p_mid, p_next, bias]


def bias_walk_case(rng, K):
    factor = BiasWalkFactor((BIAS_A, BIAS_B), np.eye(6) * 1e4)
    return factor, [random_bias(rng), random_bias(rng)]


def pose_prior_case(rng, K):
    prior = random_pose(rng)
    factor = PosePriorFactor(POSE_A, prior, np.eye(6))
    return factor, [nearby_pose(rng, prior, sigma_r=0.3)]


def bias_prior_case(rng, K):
    factor = BiasPriorFactor(BIAS_A, random_bias(rng), np.eye(6))
    return factor, [random_bias(rng)]


CASES: dict[str, Callable] = {
    "fsp": lambda rng, K: fsp_case(rng, K, same_camera=False),
    "fsp_at_anchor": lambda rng, K: fsp_case(rng, K, same_camera=True),
    "fhp": lambda rng, K: fhp_case(rng, K, same_camera=False),
    "fhp_at_anchor": lambda rng, K: fhp_case(rng, K, same_camera=True),
    "imu_ternary": imu_case,
    "bias_walk": bias_walk_case,
    "pose_prior": pose_prior_case,
    "bias_prior": bias_prior_case,
}


@pytest.mark.parametrize("case", CASES)
def test_jacobians(case, rng, K):
    for _ in range(100):
        factor, values = CASES[case](rng, K)
        assert_jacobians_match(factor, values)


def test_fsp_residual_is_observed_minus_predicted(rng, K):
    factor, values = fsp_case(rng, K, same_camera=False)
    predicted = fsp_project_all(K, *values)
    assert factor.residual(values) == approx((factor.measurement - predicted).ravel())
    assert factor.cost(values) == approx(np.sum(factor.residual(values) ** 2))


def test_zero_residual_at_anchor(rng, K):
    anchor = random_pose(rng)
    rect = random_fsp(rng)
    measurement = fsp_project_all(K, anchor, anchor, rect)
    factor = FspReprojectionFactor(POSE_A, POSE_A, FSP, measurement, K, np.eye(8))
    assert factor.cost([anchor, anchor, rect.with_omega(3.0)]) == approx(0.0, abs=1e-16)


def test_pose_prior_residual(rng):
    prior = random_pose(rng)
    factor = PosePriorFactor(POSE_A, prior, np.eye(6))
    assert factor.residual([prior]) == approx(np.zeros(6), abs=1e-12)
    moved = Pose(prior.translation + [1.0, 0.0, 0.0], prior.rotation)
    assert factor.residual([moved]) == approx([1.0, 0, 0, 0, 0, 0], abs=1e-12)


def test_wrong_variable_kind(K):
    with pytest.raises(ValueError, match="expects a pose variable"):
        FspReprojectionFactor(FSP, POSE_A, FSP, np.zeros((4, 2)), K, np.eye(8))
    with pytest.raises(ValueError, match="connects 2 variables"):
        BiasWalkFactor((BIAS_A,), np.eye(6))


@pytest.mark.parametrize(
    ("information", "match"),
    [
        (np.eye(5), "shape"),
        (np.triu(np.ones((6, 6))), "symmetric"),
        (-np.eye(6), "positive definite"),
    ],
)
def test_invalid_information(information, match):
    with pytest.raises(ValueError, match=match):
        BiasWalkFactor((BIAS_A, BIAS_B), information)


def test_repr(K):
    factor = FspReprojectionFactor(POSE_B, POSE_A, FSP, np.zeros((4, 2)), K, np.eye(8))
    assert repr(factor) == "FspReprojectionFactor(pose#1, pose#0, fsp#3)"
