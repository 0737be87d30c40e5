from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy import ndarray as A

from fsp_slam.geometry.lie import Pose, Rotation
from fsp_slam.simulator.specs import TrajectorySpec
from fsp_slam.utils.exceptions import OutOfRange

#: Camera orientation at zero yaw and tilt: optical axis along world +x,
#: image x along world -y, image y along world -z
LEVEL_CAMERA = np.array(
    [
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)


@dataclass(frozen=True, eq=False)
class TrajectorySample:
    t: float
    pose: Pose
    #: World frame (m/s)
    velocity: A
    #: World frame (m/s^2)
    acceleration: A
    #: Body frame (rad/s)
    angular_rate: A


def _rz(angle: float) -> A:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rx(angle: float) -> A:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def camera_orientation(yaw: float, tilt: float = 0.0) -> A:
    """World-from-camera rotation for the given heading. Positive tilt raises
    the optical axis.
    """
    return _rz(yaw) @ LEVEL_CAMERA @ _rx(tilt)


def sample_trajectory(spec: TrajectorySpec, t: float) -> TrajectorySample:
    """Closed-form pose and derivatives at time ``t``.

    Raises:
        OutOfRange: If ``t`` is outside ``[0, duration]``
    """
    # tolerate the rounding of sample timestamps computed as k / rate
    if not -1e-9 <= t <= spec.duration + 1e-9:
        msg = f"t={t} is outside of the trajectory [0, {spec.duration}]"
        raise OutOfRange(msg)
    derivatives = np.array([axis.derivatives(t) for axis in spec.axes])
    yaw, yaw_rate, _ = spec.yaw.derivatives(t)
    R = camera_orientation(yaw, spec.camera_tilt)
    return TrajectorySample(
        t=t,
        pose=Pose(derivatives[:, 0], Rotation.from_matrix(R)),
        velocity=derivatives[:, 1],
        acceleration=derivatives[:, 2],
        angular_rate=R.T @ np.array([0.0, 0.0, yaw_rate]),
    )


def frame_times(duration: float, rate_hz: float) -> A:
    """Timestamps ``k / rate`` covering ``[0, duration]``"""
    n = int(np.floor(duration * rate_hz + 1e-9))
    return np.arange(n + 1) / rate_hz
