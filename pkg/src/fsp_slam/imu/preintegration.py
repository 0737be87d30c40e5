"""Preintegration of IMU samples between two camera keyframes.

The deltas are expressed in the body frame of the first keyframe and do not
contain gravity::

    R_j = R_i dR
    v_j = v_i + g dt + R_i dV
    p_j = p_i + v_i dt + 1/2 g dt^2 + R_i dP

Between consecutive samples, the rotated specific force is interpolated
linearly (trapezoidal velocity update, exact double integration of the linear
interpolant for the position) and the gyro rate is averaged (midpoint rotation
update).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy import ndarray as A

from fsp_slam.geometry.lie import Rotation, hat, right_jacobian, so3_exp
from fsp_slam.utils.exceptions import (
    DegenerateInterval,
    EmptyBuffer,
    NonMonotonicTimestamps,
)


@dataclass(frozen=True, eq=False)
class ImuSample:
    #: Timestamp (s)
    t: float
    #: Specific force in the body frame (m/s^2)
    accel: A
    #: Angular rate in the body frame (rad/s)
    gyro: A

    def __post_init__(self) -> None:
        object.__setattr__(self, "accel", np.asarray(self.accel, dtype=float).reshape(3))
        object.__setattr__(self, "gyro", np.asarray(self.gyro, dtype=float).reshape(3))


@dataclass(frozen=True, eq=False)
class ImuBias:
    #: Accelerometer bias (m/s^2)
    b_a: A = field(default_factory=lambda: np.zeros(3))
    #: Gyroscope bias (rad/s)
    b_g: A = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        object.__setattr__(self, "b_a", np.asarray(self.b_a, dtype=float).reshape(3))
        object.__setattr__(self, "b_g", np.asarray(self.b_g, dtype=float).reshape(3))
        if not (np.all(np.isfinite(self.b_a)) and np.all(np.isfinite(self.b_g))):
            msg = "IMU biases must be finite"
            raise ValueError(msg)

    @classmethod
    def zero(cls) -> ImuBias:
        return cls()

    @property
    def vector(self) -> A:
        """``(b_a, b_g)``"""
        return np.concatenate([self.b_a, self.b_g])

    @classmethod
    def from_vector(cls, vec: A) -> ImuBias:
        return cls(b_a=vec[:3], b_g=vec[3:6])

    def boxplus(self, delta: A) -> ImuBias:
        return ImuBias.from_vector(self.vector + delta)


@dataclass(frozen=True)
class ImuNoise:
    """Discrete standard deviations of a single IMU sample"""

    #: Accelerometer (m/s^2)
    sigma_a: float = 0.0
    #: Gyroscope (rad/s)
    sigma_g: float = 0.0


@dataclass(frozen=True, eq=False)
class Preintegrated:
    #: Start and end of the interval (s)
    t0: float
    t1: float
    dP: A
    dV: A
    dR: Rotation
    #: Bias used for the integration
    bias_ref: ImuBias
    #: Covariance of the ``(dP, dV, dR)`` errors, shape ``(9, 9)``
    covariance: A
    #: First order sensitivities with respect to the biases
    J_R_bg: A
    J_V_ba: A
    J_V_bg: A
    J_P_ba: A
    J_P_bg: A

    @property
    def dt(self) -> float:
        return self.t1 - self.t0

    @property
    def info(self) -> A:
        """Information matrix of the ``(dP, dV, dR)`` errors"""
        cov = 0.5 * (self.covariance + self.covariance.T)
        return np.linalg.pinv(cov, hermitian=True)

    def bias_correction_rotvec(self, bias: ImuBias) -> A:
        """``J_R_bg (b_g - b_g_ref)``"""
        return self.J_R_bg @ (bias.b_g - self.bias_ref.b_g)

    def corrected(self, bias: ImuBias) -> tuple[A, A, Rotation]:
        """Deltas at a different bias, corrected to first order.

        Returns:
            ``dP, dV, dR``
        """
        d_ba = bias.b_a - self.bias_ref.b_a
        d_bg = bias.b_g - self.bias_ref.b_g
        dP = self.dP + self.J_P_ba @ d_ba + self.J_P_bg @ d_bg
        dV = self.dV + self.J_V_ba @ d_ba + self.J_V_bg @ d_bg
        dR = self.dR @ so3_exp(self.J_R_bg @ d_bg)
        return dP, dV, dR


def _check_samples(samples: Sequence[ImuSample]) -> None:
    if len(samples) == 0:
        msg = "Cannot preintegrate an empty IMU buffer"
        raise EmptyBuffer(msg)
    ts = np.array([s.t for s in samples])
    if np.any(np.diff(ts) <= 0):
        msg = "IMU timestamps must be strictly increasing"
        raise NonMonotonicTimestamps(msg)
    if len(samples) < 2:
        msg = "A single IMU sample spans an interval of zero length"
        raise DegenerateInterval(msg)


def preintegrate(
    samples: Sequence[ImuSample],
    bias: ImuBias,
    noise: ImuNoise | None = None,
) -> Preintegrated:
    """Preintegrate the samples spanning ``[samples[0].t, samples[-1].t]``.

    Args:
        samples: IMU samples; the first and last one are taken at the keyframe
            times
        bias: Bias to subtract (becomes ``bias_ref``)
        noise: Per-sample noise used for the covariance propagation. Without it,
            the covariance is zero.

    Raises:
        EmptyBuffer, NonMonotonicTimestamps, DegenerateInterval
    """
    _check_samples(samples)
    if noise is None:
        noise = ImuNoise()
    R = np.eye(3)
    V = np.zeros(3)
    P = np.zeros(3)
    J_R = np.zeros((3, 3))
    J_Va = np.zeros((3, 3))
    J_Vg = np.zeros((3, 3))
    J_Pa = np.zeros((3, 3))
    J_Pg = np.zeros((3, 3))
    # error state (dtheta, dv, dp)
    cov = np.zeros((9, 9))
    q_noise = np.diag([noise.sigma_g**2] * 3 + [noise.sigma_a**2] * 3)

    for s0, s1 in zip(samples[:-1], samples[1:]):
        dt = s1.t - s0.t
        acc0 = s0.accel - bias.b_a
        acc1 = s1.accel - bias.b_a
        rate = 0.5 * (s0.gyro + s1.gyro) - bias.b_g
        step = so3_exp(rate * dt).matrix
        jr_step = right_jacobian(rate * dt)
        R1 = R @ step

        a0 = R @ acc0
        a1 = R1 @ acc1
        # bias sensitivities of the rotated specific forces
        da0_dbg = -R @ hat(acc0) @ J_R
        J_R1 = step.T @ J_R - jr_step * dt
        da1_dbg = -R1 @ hat(acc1) @ J_R1

        P_next = P + V * dt + dt**2 * (a0 / 3.0 + a1 / 6.0)
        V_next = V + 0.5 * (a0 + a1) * dt
        J_Pa = J_Pa + J_Va * dt - dt**2 * (R / 3.0 + R1 / 6.0)
        J_Pg = J_Pg + J_Vg * dt + dt**2 * (da0_dbg / 3.0 + da1_dbg / 6.0)
        J_Va = J_Va - 0.5 * (R + R1) * dt
        J_Vg = J_Vg + 0.5 * (da0_dbg + da1_dbg) * dt

        a_mid_x = hat(0.5 * (acc0 + acc1))
        transition = np.eye(9)
        transition[0:3, 0:3] = step.T
        transition[3:6, 0:3] = -R @ a_mid_x * dt
        transition[6:9, 0:3] = -0.5 * R @ a_mid_x * dt**2
        transition[6:9, 3:6] = np.eye(3) * dt
        noise_map = np.zeros((9, 6))
        noise_map[0:3, 0:3] = jr_step * dt
        noise_map[3:6, 3:6] = R * dt
        noise_map[6:9, 3:6] = 0.5 * R * dt**2
        cov = transition @ cov @ transition.T + noise_map @ q_noise @ noise_map.T

        R, V, P, J_R = R1, V_next, P_next, J_R1

    # reorder (dtheta, dv, dp) -> (dP, dV, dR)
    order = np.r_[6:9, 3:6, 0:3]
    return Preintegrated(
        t0=samples[0].t,
        t1=samples[-1].t,
        dP=P,
        dV=V,
        dR=Rotation.from_matrix(R),
        bias_ref=bias,
        covariance=cov[np.ix_(order, order)],
        J_R_bg=J_R,
        J_V_ba=J_Va,
        J_V_bg=J_Vg,
        J_P_ba=J_Pa,
        J_P_bg=J_Pg,
    )


def concatenate(first: Preintegrated, second: Preintegrated) -> Preintegrated:
    """Compose two consecutive preintegrations (same reference bias) into one
    spanning both intervals.
    """
    if not np.isclose(first.t1, second.t0):
        msg = f"Intervals are not consecutive: {first.t1} != {second.t0}"
        raise DegenerateInterval(msg)
    Ra = first.dR.matrix
    Rb = second.dR.matrix
    dt_b = second.dt
    # error state maps in (dP, dV, dR) ordering
    map_first = np.eye(9)
    map_first[0:3, 3:6] = np.eye(3) * dt_b
    map_first[0:3, 6:9] = -Ra @ hat(second.dP)
    map_first[3:6, 6:9] = -Ra @ hat(second.dV)
    map_first[6:9, 6:9] = Rb.T
    map_second = np.zeros((9, 9))
    map_second[0:3, 0:3] = Ra
    map_second[3:6, 3:6] = Ra
    map_second[6:9, 6:9] = np.eye(3)
    cov = (
        map_first @ first.covariance @ map_first.T
        + map_second @ second.covariance @ map_second.T
    )
    return Preintegrated(
        t0=first.t0,
        t1=second.t1,
        dP=first.dP + first.dV * dt_b + Ra @ second.dP,
        dV=first.dV + Ra @ second.dV,
        dR=first.dR @ second.dR,
        bias_ref=first.bias_ref,
        covariance=cov,
        J_R_bg=Rb.T @ first.J_R_bg + second.J_R_bg,
        J_V_ba=first.J_V_ba + Ra @ second.J_V_ba,
        J_V_bg=first.J_V_bg - Ra @ hat(second.dV) @ first.J_R_bg + Ra @ second.J_V_bg,
        J_P_ba=first.J_P_ba + first.J_V_ba * dt_b + Ra @ second.J_P_ba,
        J_P_bg=(
            first.J_P_bg
            + first.J_V_bg * dt_b
            - Ra @ hat(second.dP) @ first.J_R_bg
            + Ra @ second.J_P_bg
        ),
    )
