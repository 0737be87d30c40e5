"""SO(3) and SE(3) primitives.

Rotations are stored as unit quaternions ``(w, x, y, z)``; the rotation matrix is
a derived view. Increments follow the right-perturbation convention
``R <- R @ exp(delta)``; pose increments add the translation part in the world
frame.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy import ndarray as A
from scipy.spatial.transform import Rotation as _ScipyRotation

#: Below this angle, ``so3_exp`` uses the first order Taylor expansion
EXP_TAYLOR_THRESHOLD = 1e-8
#: Below this angle, the SO(3) Jacobians use their series expansions
JACOBIAN_SERIES_THRESHOLD = 1e-4


def hat(v: A | Sequence[float]) -> A:
    """Skew-symmetric matrix ``[v]_x`` such that ``hat(v) @ w == cross(v, w)``"""
    x, y, z = v
    return np.array(
        [
            [0.0, -z, y],
            [z, 0.0, -x],
            [-y, x, 0.0],
        ]
    )


def _quat_multiply(a: A, b: A) -> A:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def nearest_rotation(m: A) -> A:
    """Project a 3x3 matrix on SO(3) (closest rotation in Frobenius norm)."""
    u, _, vt = np.linalg.svd(m)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


class Rotation:
    __slots__ = ("_q",)

    def __init__(self, quat_wxyz: A | Sequence[float]):
        """Element of SO(3).

        Args:
            quat_wxyz: Quaternion (scalar first). Renormalized on construction.
        """
        q = np.asarray(quat_wxyz, dtype=float).reshape(4)
        norm = np.linalg.norm(q)
        if not np.isfinite(norm) or norm == 0.0:
            msg = f"Invalid quaternion {q}"
            raise ValueError(msg)
        self._q = q / norm

    @classmethod
    def identity(cls) -> Rotation:
        return cls([1.0, 0.0, 0.0, 0.0])

    @classmethod
    def from_matrix(cls, matrix: A) -> Rotation:
        """Rotation from a 3x3 matrix. The matrix is re-orthonormalized first."""
        xyzw = _ScipyRotation.from_matrix(nearest_rotation(np.asarray(matrix))).as_quat()
        return cls(np.roll(xyzw, 1))

    @classmethod
    def from_rotvec(cls, rotvec: A | Sequence[float]) -> Rotation:
        return so3_exp(rotvec)

    @classmethod
    def random(cls, rng: np.random.Generator) -> Rotation:
        """Uniformly distributed random rotation."""
        return cls(rng.normal(size=4))

    @property
    def quat(self) -> A:
        """Quaternion ``(w, x, y, z)``"""
        return self._q.copy()

    @property
    def matrix(self) -> A:
        w, x, y, z = self._q
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def __matmul__(self, other: Rotation) -> Rotation:
        return Rotation(_quat_multiply(self._q, other._q))

    def inverse(self) -> Rotation:
        w, x, y, z = self._q
        return Rotation([w, -x, -y, -z])

    def apply(self, v: A) -> A:
        """Rotate a vector (shape ``(3,)``) or a stack of vectors (``(N, 3)``)."""
        return np.asarray(v) @ self.matrix.T

    def boxplus(self, delta: A | Sequence[float]) -> Rotation:
        """``self @ exp(delta)``"""
        return self @ so3_exp(delta)

    def log(self) -> A:
        return so3_log(self)

    @property
    def angle(self) -> float:
        """Rotation angle in ``[0, pi]``"""
        return float(np.linalg.norm(so3_log(self)))

    def __repr__(self) -> str:
        return f"Rotation(quat_wxyz={self._q.tolist()})"


def so3_exp(omega_vec: A | Sequence[float]) -> Rotation:
    """Exponential map (Rodrigues) from an axis-angle vector in radians."""
    v = np.asarray(omega_vec, dtype=float).reshape(3)
    theta = np.linalg.norm(v)
    if theta < EXP_TAYLOR_THRESHOLD:
        return Rotation(np.concatenate([[1.0], 0.5 * v]))
    half = 0.5 * theta
    return Rotation(np.concatenate([[np.cos(half)], np.sin(half) / theta * v]))


def so3_log(rotation: Rotation) -> A:
    """Logarithmic map to an axis-angle vector with norm in ``[0, pi]``.

    At exactly ``pi`` the sign of the axis is chosen such that its first non-zero
    component is positive.
    """
    q = rotation.quat
    if q[0] < 0:
        q = -q
    w, xyz = q[0], q[1:]
    n = np.linalg.norm(xyz)
    if n < 1e-12:
        return 2.0 / w * xyz
    if w == 0.0:
        first = xyz[np.flatnonzero(np.abs(xyz) > 0)[0]]
        if first < 0:
            xyz = -xyz
    return 2.0 * np.arctan2(n, w) / n * xyz


def right_jacobian(phi: A) -> A:
    """Right Jacobian of SO(3): ``exp(phi + d) ~ exp(phi) exp(Jr(phi) d)``"""
    theta = np.linalg.norm(phi)
    phi_x = hat(phi)
    if theta < JACOBIAN_SERIES_THRESHOLD:
        return np.eye(3) - 0.5 * phi_x + phi_x @ phi_x / 6.0
    return (
        np.eye(3)
        - (1 - np.cos(theta)) / theta**2 * phi_x
        + (theta - np.sin(theta)) / theta**3 * phi_x @ phi_x
    )


def right_jacobian_inverse(phi: A) -> A:
    """Inverse of `right_jacobian`: ``log(exp(phi) exp(d)) ~ phi + Jr^-1(phi) d``"""
    theta = np.linalg.norm(phi)
    phi_x = hat(phi)
    if theta < JACOBIAN_SERIES_THRESHOLD:
        coeff = 1.0 / 12.0 + theta**2 / 720.0
    else:
        coeff = 1.0 / theta**2 - (1 + np.cos(theta)) / (2 * theta * np.sin(theta))
    return np.eye(3) + 0.5 * phi_x + coeff * phi_x @ phi_x


class Pose:
    __slots__ = ("rotation", "translation")

    def __init__(self, translation: A | Sequence[float], rotation: Rotation):
        """Element of SE(3) mapping points from a local frame to the world
        frame: ``p_world = R @ p_local + t``.

        Args:
            translation: Position of the local frame origin (meters)
            rotation: Orientation of the local frame
        """
        self.translation = np.asarray(translation, dtype=float).reshape(3).copy()
        self.rotation = rotation

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.zeros(3), Rotation.identity())

    @classmethod
    def from_vector(cls, vec: A | Sequence[float]) -> Pose:
        """Pose from ``(px, py, pz, qw, qx, qy, qz)``"""
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:3], Rotation(vec[3:]))

    def to_vector(self) -> A:
        """``(px, py, pz, qw, qx, qy, qz)``"""
        return np.concatenate([self.translation, self.rotation.quat])

    def __matmul__(self, other: Pose) -> Pose:
        return compose(self, other)

    def inverse(self) -> Pose:
        return inverse(self)

    def apply(self, p: A) -> A:
        """Transform a point (``(3,)``) or a stack of points (``(N, 3)``)."""
        return self.rotation.apply(p) + self.translation

    def boxplus(self, delta: A | Sequence[float]) -> Pose:
        """Apply a 6-vector increment ``(dt, dtheta)``: translation is added in the
        world frame, rotation is right-perturbed.
        """
        delta = np.asarray(delta, dtype=float)
        return Pose(self.translation + delta[:3], self.rotation.boxplus(delta[3:]))

    def between(self, other: Pose) -> Pose:
        """``inverse(self) @ other``"""
        return compose(inverse(self), other)

    def __repr__(self) -> str:
        return f"Pose(translation={self.translation.tolist()}, rotation={self.rotation!r})"


def compose(a: Pose, b: Pose) -> Pose:
    """``(a @ b).apply(p) == a.apply(b.apply(p))``"""
    return Pose(a.translation + a.rotation.apply(b.translation), a.rotation @ b.rotation)


def inverse(pose: Pose) -> Pose:
    r_inv = pose.rotation.inverse()
    return Pose(-r_inv.apply(pose.translation), r_inv)
