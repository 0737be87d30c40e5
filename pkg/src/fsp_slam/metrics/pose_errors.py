from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fsp_slam.geometry.lie import Pose
from fsp_slam.utils.exceptions import LengthMismatch


@dataclass(frozen=True)
class RelPoseError:
    #: Timestamp (or index) of the later pose of the pair
    t: float
    #: m
    translation: float
    #: rad
    rotation: float


def relative_pose_error(
    est: Sequence[Pose],
    gt: Sequence[Pose],
    times: Sequence[float] | None = None,
) -> list[RelPoseError]:
    """Error of the motion between consecutive poses, which does not depend on
    the global reference frame of the estimate.

    Raises:
        LengthMismatch
    """
    if len(est) != len(gt):
        msg = f"Estimated and true trajectories differ in length: {len(est)} != {len(gt)}"
        raise LengthMismatch(msg)
    if times is None:
        times = list(range(len(est)))
    elif len(times) != len(est):
        msg = f"Expected {len(est)} timestamps, got {len(times)}"
        raise LengthMismatch(msg)
    errors = []
    for k in range(1, len(est)):
        delta_est = est[k - 1].between(est[k])
        delta_gt = gt[k - 1].between(gt[k])
        errors.append(
            RelPoseError(
                t=float(times[k]),
                translation=float(
                    np.linalg.norm(delta_est.translation - delta_gt.translation)
                ),
                rotation=(delta_gt.rotation.inverse() @ delta_est.rotation).angle,
            )
        )
    return errors
