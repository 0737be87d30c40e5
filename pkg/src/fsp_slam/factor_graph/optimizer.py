"""Gauss-Newton optimization of a `FactorGraph`.

Landmark variables are eliminated with the Schur complement before the sparse
solve of the reduced (pose and bias) system and recovered by back-substitution.
A step is accepted if it does not increase the cost of the factors that can be
evaluated before it and leaves all of them evaluable. It is halved otherwise.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Mapping

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from numpy import ndarray as A

from fsp_slam.factor_graph.graph import FactorGraph
from fsp_slam.factor_graph.variables import VariableId, VariableValue
from fsp_slam.utils.exceptions import (
    ConfigError,
    NotConverged,
    PointBehindCamera,
    SingularHessian,
)
from fsp_slam.utils.log import get_logger

#: Smallest accepted pivot of the factorized system relative to the largest
_PIVOT_RTOL = 1e-14
#: Predicted decreases below this fraction of the cost are round-off
_ROUNDOFF_RTOL = 1e-10


@dataclass
class OptimizerConfig:
    max_iterations: int = 50
    #: Stop once the infinity norm of the applied step falls below this
    step_tolerance: float = 1e-8
    #: Stop once the relative cost decrease falls below this
    relative_decrease_tolerance: float = 1e-9
    #: Step halvings per iteration before giving up
    max_halvings: int = 10
    #: Solve the reduced system after Schur elimination of the landmarks
    eliminate_landmarks: bool = True

    def __post_init__(self) -> None:
        if self.max_iterations < 0:
            msg = f"max_iterations must be non-negative, got {self.max_iterations}"
            raise ConfigError(msg)
        if self.step_tolerance <= 0 or self.relative_decrease_tolerance < 0:
            msg = "Tolerances must be positive"
            raise ConfigError(msg)
        if self.max_halvings < 0:
            msg = f"max_halvings must be non-negative, got {self.max_halvings}"
            raise ConfigError(msg)


class TerminationReason(str, Enum):
    NOTHING_TO_OPTIMIZE = "nothing_to_optimize"
    ZERO_COST = "zero_cost"
    STEP_TOLERANCE = "step_tolerance"
    COST_TOLERANCE = "cost_tolerance"
    #: No step decreased the cost and the linearization predicts no decrease
    NO_DECREASE = "no_decrease"
    #: No step decreased the cost although the linearization predicts one
    STALLED = "stalled"
    MAX_ITERATIONS = "max_iterations"


#: Not converged
_FAILED = (TerminationReason.MAX_ITERATIONS, TerminationReason.STALLED)


@dataclass
class OptimizeReport:
    iterations: int
    initial_cost: float
    final_cost: float
    reason: TerminationReason
    #: Cost after every accepted iteration, starting with the initial cost.
    #: Decreasing as long as no factor becomes evaluable again.
    cost_trace: list[float] = field(default_factory=list)
    #: Number of factor evaluations skipped because a point was behind a camera
    behind_camera_evaluations: int = 0
    #: Factors that still cannot be evaluated at the final values
    outlier_factors: list[int] = field(default_factory=list)
    step_halvings: int = 0
    #: Number of landmark steps set to zero because the landmark lost the
    #: observations constraining it
    held_landmark_steps: int = 0

    @property
    def converged(self) -> bool:
        return self.reason not in _FAILED

    def raise_for_status(self) -> None:
        """Raises:
        NotConverged: If the iteration budget was exhausted or the line search
            stalled
        """
        if not self.converged:
            msg = (
                f"No convergence after {self.iterations} iterations "
                f"({self.reason.value}, cost {self.initial_cost:.6g} -> "
                f"{self.final_cost:.6g})"
            )
            raise NotConverged(msg)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["reason"] = self.reason.value
        d["converged"] = self.converged
        return d


@dataclass
class _Ordering:
    """Offsets of the free variables in the solved vector"""

    offsets: dict[VariableId, int]
    landmarks: list[VariableId]
    dim: int


@dataclass
class _LinearSystem:
    rows: list[A] = field(default_factory=list)
    cols: list[A] = field(default_factory=list)
    data: list[A] = field(default_factory=list)
    gradient: A = field(default_factory=lambda: np.zeros(0))
    #: Eliminated landmark blocks: Hessian, gradient and coupling with the
    #: reduced variables
    landmark_hessians: dict[VariableId, A] = field(default_factory=dict)
    landmark_gradients: dict[VariableId, A] = field(default_factory=dict)
    couplings: dict[VariableId, dict[VariableId, A]] = field(default_factory=dict)
    behind_camera: int = 0
    #: Landmarks observed by a factor that predicts a point behind a camera
    blocked: set[VariableId] = field(default_factory=set)
    #: Landmarks that receive no step in this iteration
    held: list[VariableId] = field(default_factory=list)

    def add_block(self, row_offset: int, col_offset: int, block: A) -> None:
        n_rows, n_cols = block.shape
        self.rows.append(np.repeat(np.arange(row_offset, row_offset + n_rows), n_cols))
        self.cols.append(np.tile(np.arange(col_offset, col_offset + n_cols), n_rows))
        self.data.append(block.ravel())

    def add_dense(self, indices: A, block: A) -> None:
        self.rows.append(np.repeat(indices, len(indices)))
        self.cols.append(np.tile(indices, len(indices)))
        self.data.append(block.ravel())

    def matrix(self, dim: int) -> scipy.sparse.csc_matrix:
        if not self.data:
            return scipy.sparse.csc_matrix((dim, dim))
        return scipy.sparse.coo_matrix(
            (
                np.concatenate(self.data),
                (np.concatenate(self.rows), np.concatenate(self.cols)),
            ),
            shape=(dim, dim),
        ).tocsc()


def _merged_blocks(variables: tuple[VariableId, ...], jacobians: list[A]) -> dict[VariableId, A]:
    """Sum the Jacobian blocks of repeated variables (e.g. camera and anchor
    being the same pose).
    """
    merged: dict[VariableId, A] = {}
    for var, jac in zip(variables, jacobians):
        merged[var] = merged[var] + jac if var in merged else jac
    return merged


class GaussNewton:
    def __init__(self, graph: FactorGraph, config: OptimizerConfig | None = None):
        self.graph = graph
        self.config = config or OptimizerConfig()
        self.logger = get_logger("GaussNewton")
        self.ordering = self._order(self.config.eliminate_landmarks)

    def _order(self, eliminate_landmarks: bool) -> _Ordering:
        offsets = {}
        landmarks = []
        dim = 0
        for var in self.graph.free_variables():
            if eliminate_landmarks and var.kind.is_landmark:
                landmarks.append(var)
                continue
            offsets[var] = dim
            dim += var.kind.dim
        return _Ordering(offsets, landmarks, dim)

    def linearize(self, values: Mapping[VariableId, VariableValue]) -> _LinearSystem:
        system = _LinearSystem(gradient=np.zeros(self.ordering.dim))
        offsets = self.ordering.offsets
        for _, factor in self.graph.ordered_factors():
            try:
                residual, jacobians = factor.linearize(
                    self.graph.factor_values(factor, values)
                )
            except PointBehindCamera:
                system.behind_camera += 1
                system.blocked.update(
                    v
                    for v in factor.variables
                    if v.kind.is_landmark and not self.graph.is_fixed(v)
                )
                continue
            blocks = {
                var: jac
                for var, jac in _merged_blocks(factor.variables, jacobians).items()
                if not self.graph.is_fixed(var)
            }
            weighted = {var: jac.T @ factor.information for var, jac in blocks.items()}
            for var_a, jac_t_info in weighted.items():
                grad = jac_t_info @ residual
                if var_a in offsets:
                    oa = offsets[var_a]
                    system.gradient[oa : oa + var_a.kind.dim] += grad
                else:
                    system.landmark_gradients[var_a] = (
                        system.landmark_gradients.get(var_a, 0.0) + grad
                    )
                for var_b, jac_b in blocks.items():
                    block = jac_t_info @ jac_b
                    if var_a in offsets and var_b in offsets:
                        system.add_block(offsets[var_a], offsets[var_b], block)
                    elif var_a not in offsets and var_b not in offsets:
                        system.landmark_hessians[var_a] = (
                            system.landmark_hessians.get(var_a, 0.0) + block
                        )
                    elif var_a in offsets:
                        coupling = system.couplings.setdefault(var_b, {})
                        coupling[var_a] = coupling[var_a] + block if var_a in coupling else block
        return system

    @staticmethod
    def _factorize_landmark(hessian: A) -> tuple[A, bool] | None:
        """Cholesky factor of a landmark block, None if the block is singular"""
        try:
            c, lower = scipy.linalg.cho_factor(hessian)
        except np.linalg.LinAlgError:
            return None
        pivots = np.diag(c) ** 2
        if pivots.min() <= _PIVOT_RTOL * pivots.max():
            return None
        return c, lower

    def _hold(self, system: _LinearSystem, var: VariableId) -> None:
        """Zero step for a landmark whose constraining observations are
        currently behind a camera.

        Raises:
            SingularHessian: If the landmark is unconstrained for any other
                reason
        """
        if var not in system.blocked:
            msg = f"Landmark {var} is not constrained by its observations"
            raise SingularHessian(msg)
        self.logger.debug("Holding %s: its observations are behind a camera", var)
        system.held.append(var)

    def _reduce(self, system: _LinearSystem) -> dict[VariableId, tuple[Any, A, A]]:
        """Schur complement of the landmark blocks, applied in place to the
        system. Returns the per-landmark data needed for back-substitution.
        """
        eliminated = {}
        for var in self.ordering.landmarks:
            factor = None
            if var in system.landmark_hessians:
                factor = self._factorize_landmark(system.landmark_hessians[var])
            if factor is None:
                self._hold(system, var)
                continue
            coupling = system.couplings.get(var, {})
            connected = sorted(coupling)
            indices = np.zeros(0, dtype=int)
            W = np.zeros((0, var.kind.dim))
            if connected:
                offsets = self.ordering.offsets
                indices = np.concatenate(
                    [np.arange(offsets[v], offsets[v] + v.kind.dim) for v in connected]
                )
                W = np.vstack([coupling[v] for v in connected])
            g_l = system.landmark_gradients[var]
            if connected:
                W_Hinv = scipy.linalg.cho_solve(factor, W.T).T
                system.add_dense(indices, -W_Hinv @ W.T)
                system.gradient[indices] -= W_Hinv @ g_l
            eliminated[var] = (factor, W, indices)
        return eliminated

    def _hold_in_full(
        self, H: scipy.sparse.csc_matrix, system: _LinearSystem
    ) -> scipy.sparse.csc_matrix:
        """Without elimination: replace the rows of held landmarks by the
        identity and zero their gradient.
        """
        offsets = self.ordering.offsets
        for var in sorted(system.blocked):
            idx = np.arange(offsets[var], offsets[var] + var.kind.dim)
            if self._factorize_landmark(H[idx][:, idx].toarray()) is None:
                self._hold(system, var)
        if not system.held:
            return H
        idx = np.concatenate(
            [np.arange(offsets[v], offsets[v] + v.kind.dim) for v in system.held]
        )
        keep = np.ones(self.ordering.dim)
        keep[idx] = 0.0
        mask = scipy.sparse.diags(keep)
        system.gradient[idx] = 0.0
        return (mask @ H @ mask + scipy.sparse.diags(1.0 - keep)).tocsc()

    def _solve_sparse(self, H: scipy.sparse.csc_matrix, b: A) -> A:
        if H.shape[0] == 0:
            return np.zeros(0)
        try:
            lu = scipy.sparse.linalg.splu(
                H,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as e:
            msg = f"Factorization failed: {e}"
            raise SingularHessian(msg) from e
        pivots = np.abs(lu.U.diagonal())
        if not np.all(pivots > _PIVOT_RTOL * pivots.max()):
            msg = (
                f"Hessian is rank deficient (smallest pivot {pivots.min():.3g}, "
                f"largest {pivots.max():.3g}). Is the gauge fixed?"
            )
            raise SingularHessian(msg)
        x = lu.solve(b)
        if not np.all(np.isfinite(x)):
            msg = "Non-finite solution of the normal equations"
            raise SingularHessian(msg)
        return x

    def solve(self, system: _LinearSystem) -> dict[VariableId, A]:
        """Gauss-Newton increments of the free variables. Held landmarks get no
        increment.

        Raises:
            SingularHessian
        """
        eliminated = self._reduce(system)
        H = system.matrix(self.ordering.dim)
        if not self.config.eliminate_landmarks:
            H = self._hold_in_full(H, system)
        x = self._solve_sparse(H, -system.gradient)
        deltas = {
            var: x[offset : offset + var.kind.dim]
            for var, offset in self.ordering.offsets.items()
            if var not in system.held
        }
        for var, (factor, W, indices) in eliminated.items():
            rhs = -system.landmark_gradients[var]
            if len(indices):
                rhs = rhs - W.T @ x[indices]
            deltas[var] = scipy.linalg.cho_solve(factor, rhs)
        return deltas

    def _predicted_decrease(
        self, gradient: A, system: _LinearSystem, deltas: Mapping[VariableId, A]
    ) -> float:
        """Cost decrease of the full step according to the linearization.

        Args:
            gradient: Gradient of the reduced variables before elimination
        """
        g_dot = 0.0
        for var, offset in self.ordering.offsets.items():
            if var in deltas:
                g_dot += float(gradient[offset : offset + var.kind.dim] @ deltas[var])
        for var in self.ordering.landmarks:
            if var in deltas:
                g_dot += float(system.landmark_gradients[var] @ deltas[var])
        return -g_dot

    @staticmethod
    def _apply(
        values: Mapping[VariableId, VariableValue],
        deltas: Mapping[VariableId, A],
        alpha: float,
    ) -> tuple[dict[VariableId, VariableValue], bool]:
        """Returns the updated values and whether all landmark values stay
        valid.
        """
        updated = dict(values)
        valid = True
        for var, delta in deltas.items():
            new = values[var].boxplus(alpha * delta)
            if var.kind.is_landmark and not new.is_valid:  # type: ignore[union-attr]
                valid = False
            updated[var] = new
        return updated, valid

    def run(self) -> OptimizeReport:
        cfg = self.config
        values = self.graph.values
        cost, invalid = self.graph.cost(values)
        report = OptimizeReport(
            iterations=0,
            initial_cost=cost,
            final_cost=cost,
            reason=TerminationReason.MAX_ITERATIONS,
            cost_trace=[cost],
        )
        if not self.graph.free_variables() or self.graph.n_factors == 0:
            report.reason = TerminationReason.NOTHING_TO_OPTIMIZE
            return report
        if cost == 0.0:
            report.reason = TerminationReason.ZERO_COST
            return report
        for iteration in range(1, cfg.max_iterations + 1):
            system = self.linearize(values)
            report.behind_camera_evaluations += system.behind_camera
            if system.behind_camera:
                self.logger.warning(
                    "Iteration %d: %d factors predict points behind a camera",
                    iteration,
                    system.behind_camera,
                )
            gradient = system.gradient.copy()
            deltas = self.solve(system)
            report.held_landmark_steps += len(system.held)
            predicted = self._predicted_decrease(gradient, system, deltas)
            max_step = max((float(np.max(np.abs(d))) for d in deltas.values()), default=0.0)
            # Steps are compared on the factors that can be evaluated now and
            # must keep all of them evaluable
            active = sorted(set(range(self.graph.n_factors)) - set(invalid))
            alpha = 1.0
            halvings = 0
            while True:
                candidate, valid = self._apply(values, deltas, alpha)
                if valid:
                    candidate_cost, lost = self.graph.cost(candidate, active)
                    if not lost and candidate_cost <= cost:
                        break
                if halvings == cfg.max_halvings:
                    candidate = None
                    break
                halvings += 1
                alpha *= 0.5
            report.step_halvings += halvings
            if candidate is None:
                floor = max(cfg.relative_decrease_tolerance, _ROUNDOFF_RTOL) * cost
                if max_step < cfg.step_tolerance or predicted <= floor:
                    report.reason = TerminationReason.NO_DECREASE
                else:
                    report.reason = TerminationReason.STALLED
                self.logger.debug(
                    "Iteration %d: no decrease after %d halvings "
                    "(predicted decrease %.3g), stopping",
                    iteration,
                    halvings,
                    predicted,
                )
                break
            previous_cost, previous_invalid = cost, invalid
            values = candidate
            cost, invalid = self.graph.cost(values)
            report.iterations = iteration
            report.cost_trace.append(cost)
            self.logger.debug(
                "Iteration %d: cost=%.6g step=%.3g alpha=%.3g",
                iteration,
                cost,
                max_step,
                alpha,
            )
            if cost == 0.0:
                report.reason = TerminationReason.ZERO_COST
                break
            if alpha * max_step < cfg.step_tolerance:
                report.reason = TerminationReason.STEP_TOLERANCE
                break
            regained = set(previous_invalid) - set(invalid)
            decrease = previous_cost - candidate_cost
            if not regained and decrease <= cfg.relative_decrease_tolerance * previous_cost:
                report.reason = TerminationReason.COST_TOLERANCE
                break
        self.graph.update_values(values)
        report.final_cost, report.outlier_factors = self.graph.cost(values)
        if report.outlier_factors:
            self.logger.warning(
                "%d factors predict points behind a camera and were ignored",
                len(report.outlier_factors),
            )
        if report.converged:
            self.logger.info(
                "Stopped after %d iterations (%s), cost %.6g -> %.6g",
                report.iterations,
                report.reason.value,
                report.initial_cost,
                report.final_cost,
            )
        else:
            self.logger.warning(
                "Optimization did not converge after %d iterations (%s), cost %.6g",
                report.iterations,
                report.reason.value,
                report.final_cost,
            )
        return report


def optimize(graph: FactorGraph, config: OptimizerConfig | None = None) -> OptimizeReport:
    """Minimize the total cost of the graph in place.

    Raises:
        SingularHessian: If the free variables are not fully constrained
    """
    return GaussNewton(graph, config).run()


def dense_hessian(graph: FactorGraph) -> tuple[A, dict[VariableId, int]]:
    """Gauss-Newton Hessian over all free variables (no elimination) at the
    current values, with the offset of each variable.
    """
    solver = GaussNewton(graph, OptimizerConfig(eliminate_landmarks=False))
    system = solver.linearize(graph.values)
    return system.matrix(solver.ordering.dim).toarray(), solver.ordering.offsets


def optimize_landmarks(graph: FactorGraph, config: OptimizerConfig | None = None) -> OptimizeReport:
    """Optimize the landmark variables alone, holding every other variable at
    its current value.
    """
    held = [v for v in graph.free_variables() if not v.kind.is_landmark]
    for var in held:
        graph.fix_variable(var)
    try:
        return optimize(graph, config)
    finally:
        for var in held:
            graph.unfix_variable(var)
