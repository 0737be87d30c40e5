"""Ternary inertial constraint among three successive camera poses.

Velocities are not part of the state: the velocity at the first pose is solved
from the position equation of the first interval and propagated to the middle
pose, which makes the position equation of the second interval a constraint on
the three poses (and the bias) only.
"""

import numpy as np
from numpy import ndarray as A

from fsp_slam.geometry.lie import (
    Pose,
    Rotation,
    hat,
    right_jacobian,
    right_jacobian_inverse,
    so3_log,
)
from fsp_slam.imu.preintegration import ImuBias, Preintegrated
from fsp_slam.utils.exceptions import DegenerateInterval

#: Gravity in the world frame (m/s^2)
GRAVITY = np.array([0.0, 0.0, -9.81])

IMU_RESIDUAL_DIM = 9


def _check_intervals(pre1: Preintegrated, pre2: Preintegrated) -> None:
    if pre1.dt <= 0 or pre2.dt <= 0:
        msg = f"Preintegration intervals must be positive, got {pre1.dt} and {pre2.dt}"
        raise DegenerateInterval(msg)
    if not np.isclose(pre1.t1, pre2.t0):
        msg = f"Intervals are not consecutive: {pre1.t1} != {pre2.t0}"
        raise DegenerateInterval(msg)


def _middle_velocity(
    p_prev: Pose, p_mid: Pose, dP1: A, dV1: A, dt1: float, gravity: A
) -> A:
    R0 = p_prev.rotation.matrix
    v_prev = (
        p_mid.translation - p_prev.translation - 0.5 * gravity * dt1**2 - R0 @ dP1
    ) / dt1
    return v_prev + gravity * dt1 + R0 @ dV1


def imu_ternary_residual(
    p_prev: Pose,
    p_mid: Pose,
    p_next: Pose,
    pre1: Preintegrated,
    pre2: Preintegrated,
    bias: ImuBias,
    gravity: A = GRAVITY,
) -> A:
    """9-vector residual: position error at ``p_next`` (3), rotation error over
    the first (3) and over the second interval (3).

    Raises:
        DegenerateInterval
    """
    return imu_ternary_linearize(p_prev, p_mid, p_next, pre1, pre2, bias, gravity)[0]


def imu_ternary_linearize(
    p_prev: Pose,
    p_mid: Pose,
    p_next: Pose,
    pre1: Preintegrated,
    pre2: Preintegrated,
    bias: ImuBias,
    gravity: A = GRAVITY,
) -> tuple[A, list[A]]:
    """Residual and its Jacobians with respect to the three pose increments and
    the bias increment (each ``(9, 6)``).
    """
    _check_intervals(pre1, pre2)
    dt1, dt2 = pre1.dt, pre2.dt
    dP1, dV1, dR1 = pre1.corrected(bias)
    dP2, _, dR2 = pre2.corrected(bias)
    R0 = p_prev.rotation.matrix
    R1 = p_mid.rotation.matrix
    R2 = p_next.rotation.matrix

    v_mid = _middle_velocity(p_prev, p_mid, dP1, dV1, dt1, gravity)
    r_pos = (
        p_next.translation
        - p_mid.translation
        - v_mid * dt2
        - 0.5 * gravity * dt2**2
        - R1 @ dP2
    )
    X1 = dR1.inverse() @ p_prev.rotation.inverse() @ p_mid.rotation
    X2 = dR2.inverse() @ p_mid.rotation.inverse() @ p_next.rotation
    r_rot1 = so3_log(X1)
    r_rot2 = so3_log(X2)
    residual = np.concatenate([r_pos, r_rot1, r_rot2])

    ratio = dt2 / dt1
    jr_inv1 = right_jacobian_inverse(r_rot1)
    jr_inv2 = right_jacobian_inverse(r_rot2)
    J0 = np.zeros((9, 6))
    J1 = np.zeros((9, 6))
    J2 = np.zeros((9, 6))
    Jb = np.zeros((9, 6))

    c = ratio * dP1 - dt2 * dV1
    J0[0:3, 0:3] = ratio * np.eye(3)
    J0[0:3, 3:6] = -R0 @ hat(c)
    J0[3:6, 3:6] = -jr_inv1 @ R1.T @ R0

    J1[0:3, 0:3] = -(1.0 + ratio) * np.eye(3)
    J1[0:3, 3:6] = R1 @ hat(dP2)
    J1[3:6, 3:6] = jr_inv1
    J1[6:9, 3:6] = -jr_inv2 @ R2.T @ R1

    J2[0:3, 0:3] = np.eye(3)
    J2[6:9, 3:6] = jr_inv2

    Jb[0:3, 0:3] = ratio * R0 @ pre1.J_P_ba - dt2 * R0 @ pre1.J_V_ba - R1 @ pre2.J_P_ba
    Jb[0:3, 3:6] = ratio * R0 @ pre1.J_P_bg - dt2 * R0 @ pre1.J_V_bg - R1 @ pre2.J_P_bg
    Jb[3:6, 3:6] = (
        -jr_inv1
        @ X1.matrix.T
        @ right_jacobian(pre1.bias_correction_rotvec(bias))
        @ pre1.J_R_bg
    )
    Jb[6:9, 3:6] = (
        -jr_inv2
        @ X2.matrix.T
        @ right_jacobian(pre2.bias_correction_rotvec(bias))
        @ pre2.J_R_bg
    )
    return residual, [J0, J1, J2, Jb]


def imu_ternary_covariance(
    pre1: Preintegrated, pre2: Preintegrated, R_prev: Rotation, R_mid: Rotation
) -> A:
    """Covariance of the ternary residual propagated from the preintegration
    covariances, linearized at zero residual with the given orientations of the
    first two poses.
    """
    _check_intervals(pre1, pre2)
    ratio = pre2.dt / pre1.dt
    R0 = R_prev.matrix
    R1 = R_mid.matrix
    # maps the (dP, dV, dR) errors of both intervals to the residual
    m1 = np.zeros((9, 9))
    m1[0:3, 0:3] = ratio * R0
    m1[0:3, 3:6] = -pre2.dt * R0
    m1[3:6, 6:9] = -np.eye(3)
    m2 = np.zeros((9, 9))
    m2[0:3, 0:3] = -R1
    m2[6:9, 6:9] = -np.eye(3)
    cov = m1 @ pre1.covariance @ m1.T + m2 @ pre2.covariance @ m2.T
    return 0.5 * (cov + cov.T)


def bias_walk_residual(bias_prev: ImuBias, bias_next: ImuBias) -> A:
    return bias_next.vector - bias_prev.vector


def bias_walk_information(dt: float, walk_sigma_a: float, walk_sigma_g: float) -> A:
    """Information of a random walk over ``dt`` seconds with the given
    densities (units per square root second).
    """
    return np.diag([1.0 / (walk_sigma_a**2 * dt)] * 3 + [1.0 / (walk_sigma_g**2 * dt)] * 3)


def predict_next_pose(
    p_prev: Pose,
    p_mid: Pose,
    pre1: Preintegrated,
    pre2: Preintegrated,
    bias: ImuBias,
    gravity: A = GRAVITY,
) -> Pose:
    """Dead-reckoned pose after the second interval, i.e. the pose that zeroes
    the position and second rotation residual of the ternary constraint.
    """
    _check_intervals(pre1, pre2)
    dP1, dV1, _ = pre1.corrected(bias)
    dP2, _, dR2 = pre2.corrected(bias)
    v_mid = _middle_velocity(p_prev, p_mid, dP1, dV1, pre1.dt, gravity)
    dt2 = pre2.dt
    translation = (
        p_mid.translation
        + v_mid * dt2
        + 0.5 * gravity * dt2**2
        + p_mid.rotation.apply(dP2)
    )
    return Pose(translation, p_mid.rotation @ dR2)


def propagate_pose(
    pose: Pose,
    velocity: A,
    pre: Preintegrated,
    bias: ImuBias,
    gravity: A = GRAVITY,
) -> tuple[Pose, A]:
    """Pose and velocity at the end of the interval, starting from a known
    velocity.
    """
    dP, dV, dR = pre.corrected(bias)
    dt = pre.dt
    R = pose.rotation
    translation = pose.translation + velocity * dt + 0.5 * gravity * dt**2 + R.apply(dP)
    return Pose(translation, R @ dR), velocity + gravity * dt + R.apply(dV)
