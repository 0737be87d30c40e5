import numpy as np
import pytest
from pytest import approx  # noqa: PT013

from fsp_slam.factor_graph.factors import (
    FhpReprojectionFactor,
    FspReprojectionFactor,
    PosePriorFactor,
)
from fsp_slam.factor_graph.graph import FactorGraph
from fsp_slam.factor_graph.optimizer import (
    GaussNewton,
    OptimizeReport,
    OptimizerConfig,
    TerminationReason,
    dense_hessian,
    optimize,
    optimize_landmarks,
)
from fsp_slam.factor_graph.variables import VariableKind
from fsp_slam.geometry.lie import Pose, Rotation
from fsp_slam.parameterization.fhp import FhpPoint, fhp_project
from fsp_slam.parameterization.fsp import fsp_dims, fsp_project_all
from fsp_slam.utils.exceptions import ConfigError, NotConverged, SingularHessian

from .factories import random_fsp


def camera_poses(n: int) -> list[Pose]:
    """First camera at the origin, the others on a short sideways baseline"""
    return [
        Pose([0.3 * k, 0.05 * k, 0.02 * k], Rotation.from_rotvec([0.0, -0.02 * k, 0.01 * k]))
        for k in range(n)
    ]


def fsp_problem(
    rng,
    K,
    *,
    n_poses: int = 3,
    n_landmarks: int = 2,
    sigma_px: float = 0.0,
    fix_first: bool = True,
    pose_priors: bool = False,
    perturb: bool = True,
    perturb_poses: bool = True,
):
    """Rectangles anchored at the first camera and observed by all cameras"""
    graph = FactorGraph()
    poses = camera_poses(n_poses)
    truths = [random_fsp(rng) for _ in range(n_landmarks)]
    pose_ids = []
    for k, pose in enumerate(poses):
        initial = pose
        if perturb_poses and k > 0:
            initial = pose.boxplus(rng.normal(scale=[0.02] * 3 + [0.005] * 3))
        pose_ids.append(graph.add_variable(VariableKind.POSE, initial))
    if fix_first:
        graph.fix_variable(pose_ids[0])
    factors = []
    if pose_priors:
        factors.extend(
            PosePriorFactor(pose_ids[k], poses[k], np.eye(6)) for k in range(1, n_poses)
        )
    landmark_ids = []
    for truth in truths:
        initial = truth.with_omega(2 * truth.omega) if perturb else truth
        landmark = graph.add_variable(VariableKind.FSP, initial)
        landmark_ids.append(landmark)
        for k, pose in enumerate(poses):
            measurement = fsp_project_all(K, pose, poses[0], truth)
            measurement = measurement + rng.normal(scale=sigma_px, size=(4, 2))
            factors.append(
                FspReprojectionFactor(
                    pose_ids[k], pose_ids[0], landmark, measurement, K, np.eye(8)
                )
            )
    for factor in factors:
        graph.add_factor(factor)
    return graph, pose_ids, landmark_ids, poses, truths


def two_view_fhp(K, omega_init: float):
    graph = FactorGraph()
    anchor = Pose.identity()
    second = Pose([0.5, 0.0, 0.0], Rotation.identity())
    truth = FhpPoint(ray=[0.1, 0.05], omega=0.25)
    ids = [graph.add_variable(VariableKind.POSE, p) for p in (anchor, second)]
    for var in ids:
        graph.fix_variable(var)
    point = graph.add_variable(VariableKind.FHP, FhpPoint(truth.ray, omega_init))
    for var, pose in zip(ids, (anchor, second)):
        measurement = fhp_project(K, pose, anchor, truth).as_array()
        graph.add_factor(FhpReprojectionFactor(var, ids[0], point, measurement, K, np.eye(2)))
    return graph, ids, point, truth


def test_two_view_triangulation(K):
    graph, _, point, truth = two_view_fhp(K, omega_init=0.5)
    report = optimize(graph)
    assert report.converged
    assert report.iterations <= 10
    assert graph.value(point).omega == approx(truth.omega, abs=1e-6)
    assert graph.value(point).ray == approx(truth.ray, abs=1e-9)


def test_fsp_landmarks_converge(rng, K):
    graph, pose_ids, landmark_ids, _, truths = fsp_problem(rng, K, perturb_poses=False)
    for var in pose_ids:
        graph.fix_variable(var)
    report = optimize(graph)
    assert report.converged
    assert report.final_cost < 1e-10
    for var, truth in zip(landmark_ids, truths):
        est = fsp_dims(graph.value(var))
        expected = fsp_dims(truth)
        assert est.w == approx(expected.w, abs=1e-6)
        assert est.h == approx(expected.h, abs=1e-6)


def test_monotone_cost(rng, K):
    graph, *_ = fsp_problem(rng, K, sigma_px=1.0, pose_priors=True)
    report = optimize(graph)
    assert report.converged
    assert report.final_cost <= report.initial_cost
    trace = np.array(report.cost_trace)
    assert np.all(np.diff(trace) <= 0)
    assert report.final_cost == approx(trace[-1])


def test_schur_matches_full_solve(rng, K):
    graph, *_ = fsp_problem(rng, K, sigma_px=1.0, pose_priors=True)
    values = graph.values
    steps = []
    for eliminate in (True, False):
        solver = GaussNewton(graph, OptimizerConfig(eliminate_landmarks=eliminate))
        steps.append(solver.solve(solver.linearize(values)))
    reduced, full = steps
    assert reduced.keys() == full.keys()
    for var in full:
        assert reduced[var] == approx(full[var], abs=1e-8)


def test_schur_and_full_converge_to_same_estimate(K):
    estimates = []
    for eliminate in (True, False):
        graph, _, landmark_ids, *_ = fsp_problem(
            np.random.default_rng(3), K, sigma_px=1.0, pose_priors=True
        )
        optimize(graph, OptimizerConfig(eliminate_landmarks=eliminate))
        estimates.append([graph.value(v).to_vector() for v in landmark_ids])
    for a, b in zip(*estimates):
        assert a == approx(b, abs=1e-7)


def shuffled_copy(graph: FactorGraph, seed: int = 0) -> FactorGraph:
    """Same variables (and ids) with the factors added in random order"""
    factors = graph.factors
    np.random.default_rng(seed).shuffle(factors)
    shuffled = FactorGraph()
    for var in graph.variables():
        new = shuffled.add_variable(var.kind, graph.value(var))
        assert new == var
        if graph.is_fixed(var):
            shuffled.fix_variable(new)
    for factor in factors:
        shuffled.add_factor(factor)
    return shuffled


def test_factor_order_is_canonical(rng, K):
    graph, *_ = fsp_problem(rng, K, pose_priors=True)
    shuffled = shuffled_copy(graph)
    assert [f for _, f in graph.ordered_factors()] == [
        f for _, f in shuffled.ordered_factors()
    ]
    assert graph.cost()[0] == shuffled.cost()[0]


def test_permutation_invariance(K):
    estimates = []
    for shuffle in (False, True):
        graph, pose_ids, landmark_ids, *_ = fsp_problem(
            np.random.default_rng(5), K, sigma_px=1.0, pose_priors=True
        )
        if shuffle:
            graph = shuffled_copy(graph)
        optimize(graph, OptimizerConfig(step_tolerance=1e-12, relative_decrease_tolerance=0.0))
        estimates.append([graph.value(v).to_vector() for v in pose_ids + landmark_ids])
    for a, b in zip(*estimates):
        assert a == approx(b, abs=1e-12)


def test_gauge_freedom_without_fixed_pose(rng, K):
    graph, *_ = fsp_problem(rng, K, fix_first=False)
    H, _ = dense_hessian(graph)
    eigenvalues = np.linalg.eigvalsh(H)
    # translation, rotation and scale of the whole scene
    assert eigenvalues[0] < 1e-9 * eigenvalues[-1]


def test_unconstrained_pose(K):
    graph, *_ = two_view_fhp(K, omega_init=0.5)
    graph.add_variable(VariableKind.POSE, Pose.identity())
    with pytest.raises(SingularHessian):
        optimize(graph)
    with pytest.raises(SingularHessian):
        optimize(graph, OptimizerConfig(eliminate_landmarks=False))


def test_landmark_seen_from_anchor_only(K):
    truth = FhpPoint(ray=[0.1, 0.05], omega=0.25)
    single = FactorGraph()
    anchor = single.add_variable(VariableKind.POSE, Pose.identity())
    single.fix_variable(anchor)
    landmark = single.add_variable(VariableKind.FHP, FhpPoint(truth.ray, 0.5))
    measurement = fhp_project(K, Pose.identity(), Pose.identity(), truth).as_array()
    single.add_factor(
        FhpReprojectionFactor(anchor, anchor, landmark, measurement + 1.0, K, np.eye(2))
    )
    with pytest.raises(SingularHessian, match="not constrained"):
        optimize(single)


def test_all_fixed_is_noop(rng, K):
    graph, pose_ids, landmark_ids, *_ = fsp_problem(rng, K)
    before = graph.values
    for var in graph.variables():
        graph.fix_variable(var)
    report = optimize(graph)
    assert report.iterations == 0
    assert report.reason == TerminationReason.NOTHING_TO_OPTIMIZE
    assert report.converged
    for var in landmark_ids:
        assert graph.value(var) is before[var]


def test_zero_factors():
    graph = FactorGraph()
    graph.add_variable(VariableKind.POSE, Pose.identity())
    report = optimize(graph)
    assert report.iterations == 0
    assert report.final_cost == 0.0


def test_zero_cost(K):
    graph, *_ = two_view_fhp(K, omega_init=0.25)
    report = optimize(graph)
    assert report.final_cost == approx(0.0, abs=1e-20)
    assert report.iterations <= 1


def test_behind_camera_factor_is_skipped(K):
    graph, ids, point, truth = two_view_fhp(K, omega_init=0.5)
    turned = graph.add_variable(
        VariableKind.POSE, Pose.identity().boxplus([0, 0, 0, 0, np.pi, 0])
    )
    graph.fix_variable(turned)
    index = graph.add_factor(
        FhpReprojectionFactor(turned, ids[0], point, [320.0, 240.0], K, np.eye(2))
    )
    report = optimize(graph)
    assert report.converged
    assert report.behind_camera_evaluations >= 1
    assert report.outlier_factors == [index]
    assert graph.value(point).omega == approx(truth.omega, abs=1e-6)


def facing_back(position) -> Pose:
    """Camera at ``position`` looking along the negative z axis"""
    return Pose(position, Rotation.from_rotvec([0.0, np.pi, 0.0]))


def test_factor_regained_during_optimization(K):
    # The seed puts the point behind the third camera, the solution in front.
    # Its heavily weighted, slightly offset observation costs more than the
    # seed does, once the point is in front of it again.
    graph, ids, point, truth = two_view_fhp(K, omega_init=0.1)
    back = graph.add_variable(VariableKind.POSE, facing_back([0.4, 0.2, 6.0]))
    graph.fix_variable(back)
    measurement = fhp_project(K, facing_back([0.4, 0.2, 6.0]), Pose.identity(), truth)
    index = graph.add_factor(
        FhpReprojectionFactor(
            back, ids[0], point, measurement.as_array() + [2.0, 0.0], K, 1e4 * np.eye(2)
        )
    )
    assert graph.cost()[1] == [index]
    report = optimize(graph)
    assert report.converged
    assert report.behind_camera_evaluations >= 1
    assert report.outlier_factors == []
    assert graph.value(point).omega == approx(truth.omega, abs=0.02)


@pytest.mark.parametrize("eliminate", [True, False])
def test_landmark_held_while_observations_are_behind(K, eliminate):
    truth = FhpPoint(ray=[0.1, 0.05], omega=0.25)
    graph = FactorGraph()
    anchor = graph.add_variable(VariableKind.POSE, Pose.identity())
    back = graph.add_variable(VariableKind.POSE, facing_back([0.4, 0.2, 6.0]))
    graph.fix_variable(anchor)
    graph.fix_variable(back)
    point = graph.add_variable(VariableKind.FHP, FhpPoint(truth.ray + 0.01, 0.1))
    for var, pose in ((anchor, Pose.identity()), (back, facing_back([0.4, 0.2, 6.0]))):
        measurement = fhp_project(K, pose, Pose.identity(), truth).as_array()
        graph.add_factor(FhpReprojectionFactor(var, anchor, point, measurement, K, np.eye(2)))
    report = optimize(graph, OptimizerConfig(eliminate_landmarks=eliminate))
    assert report.converged
    assert report.held_landmark_steps == 1
    assert report.outlier_factors == [1]
    assert graph.value(point).omega == 0.1
    assert graph.value(point).ray == approx(truth.ray + 0.01)


def reject_all_steps(monkeypatch):
    monkeypatch.setattr(
        GaussNewton, "_apply", staticmethod(lambda values, deltas, alpha: (dict(values), False))
    )


def test_stalled_line_search_is_not_converged(rng, K, monkeypatch):
    graph, *_ = fsp_problem(rng, K, sigma_px=1.0, pose_priors=True)
    reject_all_steps(monkeypatch)
    report = optimize(graph)
    assert report.reason == TerminationReason.STALLED
    assert not report.converged
    assert report.to_dict()["converged"] is False
    with pytest.raises(NotConverged, match="stalled"):
        report.raise_for_status()


def test_no_decrease_at_minimum_is_converged(rng, K, monkeypatch):
    graph, *_ = fsp_problem(rng, K, sigma_px=1.0, pose_priors=True)
    optimize(graph, OptimizerConfig(step_tolerance=1e-12, relative_decrease_tolerance=0.0))
    reject_all_steps(monkeypatch)
    report = optimize(graph)
    assert report.reason == TerminationReason.NO_DECREASE
    assert report.converged


def test_optimize_landmarks_holds_poses(rng, K):
    graph, pose_ids, landmark_ids, *_ = fsp_problem(rng, K, sigma_px=1.0)
    before = {var: graph.value(var) for var in pose_ids}
    report = optimize_landmarks(graph)
    assert report.final_cost < report.initial_cost
    for var in pose_ids:
        assert graph.value(var) is before[var]
    assert not graph.is_fixed(pose_ids[1])
    assert graph.is_fixed(pose_ids[0])


def test_dense_hessian(rng, K):
    graph, pose_ids, landmark_ids, *_ = fsp_problem(rng, K, pose_priors=True)
    H, offsets = dense_hessian(graph)
    assert H.shape == (2 * 6 + 2 * 8, 2 * 6 + 2 * 8)
    assert H == approx(H.T)
    assert np.linalg.eigvalsh(H).min() > 0
    assert pose_ids[0] not in offsets


def test_report():
    report = OptimizeReport(
        iterations=50,
        initial_cost=2.0,
        final_cost=1.0,
        reason=TerminationReason.MAX_ITERATIONS,
    )
    assert not report.converged
    with pytest.raises(NotConverged):
        report.raise_for_status()
    d = report.to_dict()
    assert d["reason"] == "max_iterations"
    assert d["converged"] is False


@pytest.mark.parametrize(
    "kwargs",
    [{"max_iterations": -1}, {"step_tolerance": 0.0}, {"max_halvings": -2}],
)
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        OptimizerConfig(**kwargs)
