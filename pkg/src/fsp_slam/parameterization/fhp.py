"""Framed Homogeneous Points (FHP): anchored inverse-depth points, the point
feature counterpart of FSP.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Hashable

import numpy as np
from numpy import ndarray as A

from fsp_slam.geometry.camera import (
    CameraIntrinsics,
    Pixel,
    project_camera_points,
    to_camera_frame,
)
from fsp_slam.geometry.lie import Pose, hat
from fsp_slam.parameterization.fsp import homogeneous_ray
from fsp_slam.utils.exceptions import DegenerateParam

FHP_DIM = 3


@dataclass(frozen=True, eq=False)
class FhpPoint:
    #: Viewing ray in normalized anchor camera coordinates
    ray: A
    #: Inverse depth (1/m)
    omega: float
    anchor_id: Hashable | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "ray", np.asarray(self.ray, dtype=float).reshape(2))

    @property
    def is_valid(self) -> bool:
        return self.omega > 0

    def boxplus(self, delta: A) -> FhpPoint:
        return dataclasses.replace(self, ray=self.ray + delta[:2], omega=self.omega + delta[2])

    def to_vector(self) -> A:
        return np.array([self.ray[0], self.ray[1], self.omega])

    @classmethod
    def from_vector(cls, vec: A, anchor_id: Hashable | None = None) -> FhpPoint:
        return cls(ray=np.asarray(vec[:2]), omega=float(vec[2]), anchor_id=anchor_id)


def fhp_point_world(anchor: Pose, point: FhpPoint) -> A:
    """``F^W + 1/omega R^W_F r``"""
    if point.omega <= 0:
        msg = f"Inverse depth must be positive, got {point.omega}"
        raise DegenerateParam(msg)
    return anchor.translation + anchor.rotation.apply(homogeneous_ray(point.ray)) / point.omega


def fhp_project(K: CameraIntrinsics, camera: Pose, anchor: Pose, point: FhpPoint) -> Pixel:
    """Raises:
    PointBehindCamera
    """
    uv = project_camera_points(K, to_camera_frame(camera, fhp_point_world(anchor, point)))
    return Pixel(float(uv[0]), float(uv[1]))


def fhp_point_world_jacobians(anchor: Pose, point: FhpPoint) -> tuple[A, A]:
    """Derivatives of the world point with respect to the anchor pose increment
    and the FHP increment ``(du, dv, domega)``; shapes ``(3, 6)`` and ``(3, 3)``.
    """
    R_F = anchor.rotation.matrix
    inv_omega = 1.0 / point.omega
    r = homogeneous_ray(point.ray)
    j_anchor = np.zeros((3, 6))
    j_anchor[:, :3] = np.eye(3)
    j_anchor[:, 3:] = -R_F @ hat(r) * inv_omega
    j_point = np.empty((3, 3))
    j_point[:, 0] = R_F[:, 0] * inv_omega
    j_point[:, 1] = R_F[:, 1] * inv_omega
    j_point[:, 2] = -R_F @ r * inv_omega**2
    return j_anchor, j_point


def init_fhp(
    K: CameraIntrinsics,
    pixel: Pixel | A,
    omega0: float,
    anchor_id: Hashable | None = None,
) -> FhpPoint:
    """Point on the viewing ray of ``pixel`` at inverse depth ``omega0``"""
    if omega0 <= 0:
        msg = f"Inverse depth seed must be positive, got {omega0}"
        raise DegenerateParam(msg)
    uv = pixel.as_array() if isinstance(pixel, Pixel) else np.asarray(pixel, dtype=float)
    return FhpPoint(ray=K.normalize(uv), omega=omega0, anchor_id=anchor_id)
