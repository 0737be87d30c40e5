"""Factors of the graph. Every factor maps the values of its variables (in the
order of `Factor.variables`) to a residual ``observed - predicted`` and provides
its Jacobians with respect to the increments of these variables.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import ClassVar, Sequence

import numpy as np
from numpy import ndarray as A

from fsp_slam.factor_graph.variables import VariableId, VariableKind, VariableValue
from fsp_slam.geometry.camera import (
    CameraIntrinsics,
    project_camera_points,
    projection_jacobian,
    to_camera_frame,
)
from fsp_slam.geometry.lie import Pose, hat, right_jacobian_inverse, so3_log
from fsp_slam.imu.preintegration import ImuBias, Preintegrated
from fsp_slam.imu.residual import (
    GRAVITY,
    bias_walk_residual,
    imu_ternary_linearize,
)
from fsp_slam.parameterization.fhp import FhpPoint, fhp_point_world, fhp_point_world_jacobians
from fsp_slam.parameterization.fsp import (
    FspRect,
    fsp_corners_world,
    fsp_corners_world_jacobians,
)


def _check_information(information: A, dim: int) -> A:
    information = np.asarray(information, dtype=float)
    if information.shape != (dim, dim):
        msg = f"Information matrix must have shape {(dim, dim)}, got {information.shape}"
        raise ValueError(msg)
    if not np.allclose(information, information.T, rtol=1e-9, atol=1e-12):
        msg = "Information matrix must be symmetric"
        raise ValueError(msg)
    try:
        np.linalg.cholesky(information)
    except np.linalg.LinAlgError as e:
        msg = "Information matrix must be positive definite"
        raise ValueError(msg) from e
    return information


class Factor(ABC):
    #: Kinds of the variables the factor connects, in order
    signature: ClassVar[tuple[VariableKind, ...]]
    #: Residual dimension
    dim: ClassVar[int]

    def __init__(self, variables: Sequence[VariableId], information: A):
        self.variables = tuple(variables)
        if len(self.variables) != len(self.signature):
            msg = (
                f"{type(self).__name__} connects {len(self.signature)} variables, "
                f"got {len(self.variables)}"
            )
            raise ValueError(msg)
        for var, kind in zip(self.variables, self.signature):
            if var.kind != kind:
                msg = f"{type(self).__name__} expects a {kind.value} variable, got {var}"
                raise ValueError(msg)
        self.information = _check_information(information, self.dim)

    @abstractmethod
    def residual(self, values: Sequence[VariableValue]) -> A:
        pass

    @abstractmethod
    def linearize(self, values: Sequence[VariableValue]) -> tuple[A, list[A]]:
        """Residual and one ``(dim, var_dim)`` Jacobian per entry of
        `variables`. Repeated variables get one block per occurrence.
        """

    def jacobian(self, values: Sequence[VariableValue]) -> list[A]:
        return self.linearize(values)[1]

    def cost(self, values: Sequence[VariableValue]) -> float:
        """Squared Mahalanobis norm of the residual"""
        r = self.residual(values)
        return float(r @ self.information @ r)

    def __repr__(self) -> str:
        variables = ", ".join(str(v) for v in self.variables)
        return f"{type(self).__name__}({variables})"


def _camera_point_jacobians(
    K: CameraIntrinsics, camera: Pose, p_world: A
) -> tuple[A, A, A]:
    """Projection of world points ``(N, 3)`` and the Jacobians of the negated
    projection with respect to the camera increment ``(N, 2, 6)`` and to the
    world point ``(N, 2, 3)``.
    """
    p_cam = to_camera_frame(camera, p_world)
    predicted = project_camera_points(K, p_cam)
    j_proj = projection_jacobian(K, p_cam)
    R_cT = camera.rotation.matrix.T
    n = len(p_cam)
    d_pcam_d_camera = np.empty((n, 3, 6))
    d_pcam_d_camera[:, :, :3] = -R_cT
    for j in range(n):
        d_pcam_d_camera[j, :, 3:] = hat(p_cam[j])
    j_camera = -np.einsum("nij,njk->nik", j_proj, d_pcam_d_camera)
    j_point = -np.einsum("nij,jk->nik", j_proj, R_cT)
    return predicted, j_camera, j_point


class FspReprojectionFactor(Factor):
    """Pixel observations of the four corners of a rectangle in one image"""

    signature = (VariableKind.POSE, VariableKind.POSE, VariableKind.FSP)
    dim = 8

    def __init__(
        self,
        camera_id: VariableId,
        anchor_id: VariableId,
        landmark_id: VariableId,
        measurement: A,
        K: CameraIntrinsics,
        information: A,
    ):
        super().__init__((camera_id, anchor_id, landmark_id), information)
        self.measurement = np.asarray(measurement, dtype=float).reshape(4, 2)
        self.K = K

    def residual(self, values: Sequence[VariableValue]) -> A:
        camera, anchor, rect = values
        assert isinstance(camera, Pose) and isinstance(anchor, Pose)
        assert isinstance(rect, FspRect)
        corners = fsp_corners_world(anchor, rect)
        predicted = project_camera_points(self.K, to_camera_frame(camera, corners))
        return (self.measurement - predicted).reshape(8)

    def linearize(self, values: Sequence[VariableValue]) -> tuple[A, list[A]]:
        camera, anchor, rect = values
        assert isinstance(camera, Pose) and isinstance(anchor, Pose)
        assert isinstance(rect, FspRect)
        corners = fsp_corners_world(anchor, rect)
        predicted, j_camera, j_point = _camera_point_jacobians(self.K, camera, corners)
        d_corner_d_anchor, d_corner_d_rect = fsp_corners_world_jacobians(anchor, rect)
        j_anchor = np.einsum("nij,njk->nik", j_point, d_corner_d_anchor)
        j_rect = np.einsum("nij,njk->nik", j_point, d_corner_d_rect)
        residual = (self.measurement - predicted).reshape(8)
        return residual, [
            j_camera.reshape(8, 6),
            j_anchor.reshape(8, 6),
            j_rect.reshape(8, 8),
        ]


class FhpReprojectionFactor(Factor):
    signature = (VariableKind.POSE, VariableKind.POSE, VariableKind.FHP)
    dim = 2

    def __init__(
        self,
        camera_id: VariableId,
        anchor_id: VariableId,
        landmark_id: VariableId,
        measurement: A,
        K: CameraIntrinsics,
        information: A,
    ):
        super().__init__((camera_id, anchor_id, landmark_id), information)
        self.measurement = np.asarray(measurement, dtype=float).reshape(2)
        self.K = K

    def residual(self, values: Sequence[VariableValue]) -> A:
        camera, anchor, point = values
        assert isinstance(camera, Pose) and isinstance(anchor, Pose)
        assert isinstance(point, FhpPoint)
        p_cam = to_camera_frame(camera, fhp_point_world(anchor, point))
        return self.measurement - project_camera_points(self.K, p_cam)

    def linearize(self, values: Sequence[VariableValue]) -> tuple[A, list[A]]:
        camera, anchor, point = values
        assert isinstance(camera, Pose) and isinstance(anchor, Pose)
        assert isinstance(point, FhpPoint)
        p_world = fhp_point_world(anchor, point)[None, :]
        predicted, j_camera, j_point = _camera_point_jacobians(self.K, camera, p_world)
        d_point_d_anchor, d_point_d_fhp = fhp_point_world_jacobians(anchor, point)
        return self.measurement - predicted[0], [
            j_camera[0],
            j_point[0] @ d_point_d_anchor,
            j_point[0] @ d_point_d_fhp,
        ]


class ImuTernaryFactor(Factor):
    """Inertial constraint among three successive poses sharing one bias"""

    signature = (
        VariableKind.POSE,
        VariableKind.POSE,
        VariableKind.POSE,
        VariableKind.BIAS,
    )
    dim = 9

    def __init__(
        self,
        pose_ids: Sequence[VariableId],
        bias_id: VariableId,
        pre1: Preintegrated,
        pre2: Preintegrated,
        information: A,
        gravity: A = GRAVITY,
    ):
        super().__init__((*pose_ids, bias_id), information)
        self.pre1 = pre1
        self.pre2 = pre2
        self.gravity = np.asarray(gravity, dtype=float)

    def residual(self, values: Sequence[VariableValue]) -> A:
        return self.linearize(values)[0]

    def linearize(self, values: Sequence[VariableValue]) -> tuple[A, list[A]]:
        p_prev, p_mid, p_next, bias = values
        assert isinstance(bias, ImuBias)
        return imu_ternary_linearize(
            p_prev, p_mid, p_next, self.pre1, self.pre2, bias, self.gravity  # type: ignore[arg-type]
        )


class BiasWalkFactor(Factor):
    signature = (VariableKind.BIAS, VariableKind.BIAS)
    dim = 6

    def residual(self, values: Sequence[VariableValue]) -> A:
        return bias_walk_residual(*values)  # type: ignore[arg-type]

    def linearize(self, values: Sequence[VariableValue]) -> tuple[A, list[A]]:
        return self.residual(values), [-np.eye(6), np.eye(6)]


class PosePriorFactor(Factor):
    """Anchors a pose: ``(t - t_prior, log(R_prior^T R))``"""

    signature = (VariableKind.POSE,)
    dim = 6

    def __init__(self, pose_id: VariableId, prior: Pose, information: A):
        super().__init__((pose_id,), information)
        self.prior = prior

    def residual(self, values: Sequence[VariableValue]) -> A:
        (pose,) = values
        assert isinstance(pose, Pose)
        r_rot = so3_log(self.prior.rotation.inverse() @ pose.rotation)
        return np.concatenate([pose.translation - self.prior.translation, r_rot])

    def linearize(self, values: Sequence[VariableValue]) -> tuple[A, list[A]]:
        residual = self.residual(values)
        jac = np.eye(6)
        jac[3:, 3:] = right_jacobian_inverse(residual[3:])
        return residual, [jac]


class BiasPriorFactor(Factor):
    signature = (VariableKind.BIAS,)
    dim = 6

    def __init__(self, bias_id: VariableId, prior: ImuBias, information: A):
        super().__init__((bias_id,), information)
        self.prior = prior

    def residual(self, values: Sequence[VariableValue]) -> A:
        (bias,) = values
        assert isinstance(bias, ImuBias)
        return bias.vector - self.prior.vector

    def linearize(self, values: Sequence[VariableValue]) -> tuple[A, list[A]]:
        return self.residual(values), [np.eye(6)]


def numerical_jacobian(
    factor: Factor, values: Sequence[VariableValue], h: float = 1e-6
) -> list[A]:
    """Central differences of `Factor.residual` along the manifold increments
    of every variable occurrence.
    """
    values = list(values)
    blocks = []
    for i, var in enumerate(factor.variables):
        block = np.empty((factor.dim, var.kind.dim))
        for k in range(var.kind.dim):
            step = np.zeros(var.kind.dim)
            step[k] = h
            plus = list(values)
            minus = list(values)
            plus[i] = values[i].boxplus(step)
            minus[i] = values[i].boxplus(-step)
            block[:, k] = (factor.residual(plus) - factor.residual(minus)) / (2 * h)
        blocks.append(block)
    return blocks
