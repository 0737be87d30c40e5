"""Framed Structural Points (FSP) for planar rectangles.

A rectangle is anchored to the camera pose ``F`` from which it was first seen.
Its origin (bottom left corner) lies on the viewing ray ``r = [u_r, v_r, 1]`` at
inverse depth ``omega``; its size is stored as the width at unitary depth
``w_bar = w * omega`` and the form factor ``f = w / h``, and its orientation
relative to ``F`` as ``R^F_O``. With ``s_j`` the structural points of the
rectangle of width ``w_bar`` and height ``w_bar / f`` (unit depth), corner ``j``
in the world frame is::

    F^W + 1/omega * R^W_F (r + R^F_O s_j)
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import IntEnum
from typing import Hashable

import numpy as np
from numpy import ndarray as A

from fsp_slam.geometry.camera import (
    CameraIntrinsics,
    Pixel,
    project_camera_points,
    to_camera_frame,
)
from fsp_slam.geometry.lie import Pose, Rotation, hat
from fsp_slam.utils.exceptions import DegenerateParam

#: Manifold dimension of an FSP landmark: ray (2), inverse depth, w_bar, form
#: factor, relative orientation (3)
FSP_DIM = 8


class StructuralPointIndex(IntEnum):
    """Corners of a rectangle, counter-clockwise from the object origin."""

    BOTTOM_LEFT = 1
    BOTTOM_RIGHT = 2
    TOP_RIGHT = 3
    TOP_LEFT = 4


@dataclass(frozen=True)
class RectDims:
    #: Width (meters)
    w: float
    #: Height (meters)
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            msg = f"Rectangle dimensions must be positive, got w={self.w}, h={self.h}"
            raise DegenerateParam(msg)


@dataclass(frozen=True, eq=False)
class FspRect:
    #: Viewing ray ``(u_r, v_r)`` of the origin corner in normalized anchor
    #: camera coordinates
    ray: A
    #: Inverse depth (1/m)
    omega: float
    #: Width at unitary depth
    w_bar: float
    #: Width over height
    form_factor: float
    #: Orientation of the object frame relative to the anchor frame
    rel_orientation: Rotation
    #: Graph variable of the anchor pose
    anchor_id: Hashable | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "ray", np.asarray(self.ray, dtype=float).reshape(2))

    @property
    def is_valid(self) -> bool:
        """Inverse depth, width and form factor are positive"""
        return self.omega > 0 and self.w_bar > 0 and self.form_factor > 0

    def boxplus(self, delta: A) -> FspRect:
        """Apply an 8-vector increment ``(du, dv, domega, dw_bar, df, dphi)``"""
        return dataclasses.replace(
            self,
            ray=self.ray + delta[:2],
            omega=self.omega + delta[2],
            w_bar=self.w_bar + delta[3],
            form_factor=self.form_factor + delta[4],
            rel_orientation=self.rel_orientation.boxplus(delta[5:8]),
        )

    def with_omega(self, omega: float) -> FspRect:
        return dataclasses.replace(self, omega=omega)

    def to_vector(self) -> A:
        """``(u_r, v_r, omega, w_bar, f, qw, qx, qy, qz)``"""
        return np.concatenate(
            [
                self.ray,
                [self.omega, self.w_bar, self.form_factor],
                self.rel_orientation.quat,
            ]
        )

    @classmethod
    def from_vector(cls, vec: A, anchor_id: Hashable | None = None) -> FspRect:
        vec = np.asarray(vec, dtype=float)
        return cls(
            ray=vec[:2],
            omega=float(vec[2]),
            w_bar=float(vec[3]),
            form_factor=float(vec[4]),
            rel_orientation=Rotation(vec[5:9]),
            anchor_id=anchor_id,
        )


def _corners(w: float, h: float) -> A:
    return np.array(
        [
            [0.0, 0.0, 0.0],
            [w, 0.0, 0.0],
            [w, h, 0.0],
            [0.0, h, 0.0],
        ]
    )


def rect_structural_points(dims: RectDims) -> A:
    """Corners of the rectangle in its own frame (origin bottom left, all
    ``z = 0``), shape ``(4, 3)``.
    """
    return _corners(dims.w, dims.h)


def unit_depth_structural_points(rect: FspRect) -> A:
    """Structural points of the rectangle at unitary depth, i.e., of size
    ``(w_bar, w_bar / f)``.
    """
    return _corners(rect.w_bar, rect.w_bar / rect.form_factor)


def _check_omega(rect: FspRect) -> None:
    if rect.omega <= 0:
        msg = f"Inverse depth must be positive, got {rect.omega}"
        raise DegenerateParam(msg)


def fsp_dims(rect: FspRect) -> RectDims:
    """``w = w_bar / omega``, ``h = w_bar / (f omega)``"""
    _check_omega(rect)
    if rect.form_factor <= 0:
        msg = f"Form factor must be positive, got {rect.form_factor}"
        raise DegenerateParam(msg)
    return RectDims(
        w=rect.w_bar / rect.omega,
        h=rect.w_bar / (rect.form_factor * rect.omega),
    )


def homogeneous_ray(ray: A) -> A:
    return np.array([ray[0], ray[1], 1.0])


def fsp_origin_world(anchor: Pose, rect: FspRect) -> A:
    """``O^W = F^W + 1/omega R^W_F r``"""
    _check_omega(rect)
    return anchor.translation + anchor.rotation.apply(homogeneous_ray(rect.ray)) / rect.omega


def _anchor_frame_points(rect: FspRect) -> A:
    """``r + R^F_O s_j`` for all corners, shape ``(4, 3)``"""
    return homogeneous_ray(rect.ray) + rect.rel_orientation.apply(
        unit_depth_structural_points(rect)
    )


def fsp_corners_world(anchor: Pose, rect: FspRect) -> A:
    """World coordinates of the four corners, shape ``(4, 3)``"""
    fsp_dims(rect)
    return anchor.translation + anchor.rotation.apply(_anchor_frame_points(rect)) / rect.omega


def fsp_project_all(K: CameraIntrinsics, camera: Pose, anchor: Pose, rect: FspRect) -> A:
    """Predicted pixels of all four corners, shape ``(4, 2)``.

    Raises:
        PointBehindCamera
    """
    return project_camera_points(K, to_camera_frame(camera, fsp_corners_world(anchor, rect)))


def fsp_project(
    K: CameraIntrinsics,
    camera: Pose,
    anchor: Pose,
    rect: FspRect,
    j: StructuralPointIndex | int,
) -> Pixel:
    """Predicted pixel of corner ``j`` (1-based)."""
    j = StructuralPointIndex(j)
    corner = fsp_corners_world(anchor, rect)[j - 1]
    uv = project_camera_points(K, to_camera_frame(camera, corner))
    return Pixel(float(uv[0]), float(uv[1]))


def fsp_corners_world_jacobians(anchor: Pose, rect: FspRect) -> tuple[A, A]:
    """Derivatives of the world corners with respect to the anchor pose increment
    (``(dt, dtheta)``) and the FSP increment (see `FspRect.boxplus`).

    Returns:
        ``(4, 3, 6)`` and ``(4, 3, 8)`` arrays
    """
    R_F = anchor.rotation.matrix
    R_FO = rect.rel_orientation.matrix
    inv_omega = 1.0 / rect.omega
    s = unit_depth_structural_points(rect)
    q = _anchor_frame_points(rect)

    j_anchor = np.zeros((4, 3, 6))
    j_rect = np.zeros((4, 3, 8))
    # derivative of s_j with respect to w_bar and f
    ds_dw = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0 / rect.form_factor, 0.0],
            [0.0, 1.0 / rect.form_factor, 0.0],
        ]
    )
    ds_df = np.zeros((4, 3))
    ds_df[2:, 1] = -rect.w_bar / rect.form_factor**2
    for j in range(4):
        j_anchor[j, :, :3] = np.eye(3)
        j_anchor[j, :, 3:] = -R_F @ hat(q[j]) * inv_omega
        j_rect[j, :, 0] = R_F[:, 0] * inv_omega
        j_rect[j, :, 1] = R_F[:, 1] * inv_omega
        j_rect[j, :, 2] = -R_F @ q[j] * inv_omega**2
        j_rect[j, :, 3] = R_F @ R_FO @ ds_dw[j] * inv_omega
        j_rect[j, :, 4] = R_F @ R_FO @ ds_df[j] * inv_omega
        j_rect[j, :, 5:] = -R_F @ R_FO @ hat(s[j]) * inv_omega
    return j_anchor, j_rect
