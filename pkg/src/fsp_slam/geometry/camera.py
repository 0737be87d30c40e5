"""Pinhole camera model and projection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy import ndarray as A

from fsp_slam.geometry.lie import Pose
from fsp_slam.utils.exceptions import ConfigError, PointBehindCamera

#: Minimal depth (meters) of a point in the camera frame to be projectable
DEPTH_EPSILON = 1e-6


@dataclass(frozen=True)
class Pixel:
    """Image coordinates (pixels)."""

    u: float
    v: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            msg = f"Pixel coordinates must be finite, got ({self.u}, {self.v})"
            raise ValueError(msg)

    def as_array(self) -> A:
        return np.array([self.u, self.v])


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    image_width: int
    image_height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            msg = f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}"
            raise ConfigError(msg)
        if not (0 <= self.cx <= self.image_width and 0 <= self.cy <= self.image_height):
            msg = (
                f"Principal point ({self.cx}, {self.cy}) outside of the "
                f"{self.image_width}x{self.image_height} image"
            )
            raise ConfigError(msg)

    @property
    def matrix(self) -> A:
        """Calibration matrix K"""
        return np.array(
            [
                [self.fx, 0.0, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def matrix_inverse(self) -> A:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def normalize(self, pixels: A) -> A:
        """Normalized image coordinates ``K^-1 m`` (without the trailing 1) of a
        pixel (``(2,)``) or a stack of pixels (``(N, 2)``).
        """
        pixels = np.asarray(pixels, dtype=float)
        return np.stack(
            [
                (pixels[..., 0] - self.cx) / self.fx,
                (pixels[..., 1] - self.cy) / self.fy,
            ],
            axis=-1,
        )

    def contains(self, pixels: A) -> A | bool:
        """Whether pixels lie within the image bounds"""
        pixels = np.asarray(pixels, dtype=float)
        inside = (
            (pixels[..., 0] >= 0)
            & (pixels[..., 0] <= self.image_width)
            & (pixels[..., 1] >= 0)
            & (pixels[..., 1] <= self.image_height)
        )
        if inside.ndim == 0:
            return bool(inside)
        return inside


def to_camera_frame(camera: Pose, p_world: A) -> A:
    """Express world points (``(3,)`` or ``(N, 3)``) in the camera frame"""
    return (np.asarray(p_world) - camera.translation) @ camera.rotation.matrix


def project_camera_points(K: CameraIntrinsics, p_cam: A) -> A:
    """Perspective projection of points already expressed in the camera frame.

    Raises:
        PointBehindCamera: If any depth is below `DEPTH_EPSILON`
    """
    p_cam = np.asarray(p_cam, dtype=float)
    z = p_cam[..., 2]
    if np.any(z <= DEPTH_EPSILON):
        msg = f"Point with depth {np.min(z)} m is behind the camera"
        raise PointBehindCamera(msg)
    return np.stack(
        [
            K.fx * p_cam[..., 0] / z + K.cx,
            K.fy * p_cam[..., 1] / z + K.cy,
        ],
        axis=-1,
    )


def projection_jacobian(K: CameraIntrinsics, p_cam: A) -> A:
    """Derivative of the projected pixel with respect to the camera-frame point.

    Returns:
        ``(2, 3)`` for a single point, ``(N, 2, 3)`` for a stack
    """
    p_cam = np.asarray(p_cam, dtype=float)
    x, y, z = p_cam[..., 0], p_cam[..., 1], p_cam[..., 2]
    zeros = np.zeros_like(z)
    return np.stack(
        [
            np.stack([K.fx / z, zeros, -K.fx * x / z**2], axis=-1),
            np.stack([zeros, K.fy / z, -K.fy * y / z**2], axis=-1),
        ],
        axis=-2,
    )


def project_with_depth(K: CameraIntrinsics, camera: Pose, p_world: A) -> tuple[Pixel, float]:
    p_cam = to_camera_frame(camera, p_world)
    uv = project_camera_points(K, p_cam)
    return Pixel(float(uv[0]), float(uv[1])), float(p_cam[2])


def project(K: CameraIntrinsics, camera: Pose, p_world: A) -> Pixel:
    """Pixel of a world point seen from ``camera``:
    ``K (R^W_C)^-1 (p - C^W)`` followed by perspective division.

    Raises:
        PointBehindCamera: If the depth is below `DEPTH_EPSILON`
    """
    return project_with_depth(K, camera, p_world)[0]
