from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np
from numpy import ndarray as A

from fsp_slam.geometry.lie import Pose
from fsp_slam.parameterization.fhp import FhpPoint, fhp_point_world
from fsp_slam.parameterization.fsp import FspRect, fsp_corners_world, fsp_dims
from fsp_slam.simulator.specs import WorldSpec
from fsp_slam.utils.exceptions import MissingLandmark


@dataclass(frozen=True, eq=False)
class FspEstimate:
    anchor: Pose
    rect: FspRect

    def corners(self) -> A:
        return fsp_corners_world(self.anchor, self.rect)


@dataclass(frozen=True, eq=False)
class FhpEstimate:
    """Four independent corner points of one object"""

    anchors: Sequence[Pose]
    points: Sequence[FhpPoint]

    def corners(self) -> A:
        return np.array([fhp_point_world(a, p) for a, p in zip(self.anchors, self.points)])


LandmarkEstimate = Union[FspEstimate, FhpEstimate]


@dataclass(frozen=True)
class CornerError:
    object_id: int
    #: 1-based corner index
    corner: int
    #: m
    error: float


@dataclass(frozen=True)
class DimError:
    object_id: int
    w_error: float
    h_error: float
    w_est: float
    h_est: float


def _true_object(world: WorldSpec, object_id: int):
    try:
        return world.object(object_id)
    except KeyError as e:
        msg = f"Object {object_id} is not part of the ground truth"
        raise MissingLandmark(msg) from e


def _check_requested(
    estimates: Mapping[int, object], object_ids: Sequence[int] | None
) -> list[int]:
    if object_ids is None:
        return sorted(estimates)
    missing = sorted(set(object_ids) - set(estimates))
    if missing:
        msg = f"No estimate for objects {missing}"
        raise MissingLandmark(msg)
    return list(object_ids)


def corner_errors(
    estimates: Mapping[int, LandmarkEstimate],
    world: WorldSpec,
    object_ids: Sequence[int] | None = None,
) -> list[CornerError]:
    """Euclidean distance between estimated and true world corners, matched by
    object id and corner index.

    Raises:
        MissingLandmark
    """
    errors = []
    for object_id in _check_requested(estimates, object_ids):
        truth = _true_object(world, object_id).corners_world()
        distances = np.linalg.norm(estimates[object_id].corners() - truth, axis=1)
        errors.extend(
            CornerError(object_id, j + 1, float(d)) for j, d in enumerate(distances)
        )
    return errors


def dim_errors(
    estimates: Mapping[int, FspRect],
    world: WorldSpec,
    object_ids: Sequence[int] | None = None,
) -> list[DimError]:
    """Absolute width and height errors of rectangle landmarks.

    Raises:
        MissingLandmark
    """
    errors = []
    for object_id in _check_requested(estimates, object_ids):
        truth = _true_object(world, object_id)
        dims = fsp_dims(estimates[object_id])
        errors.append(
            DimError(
                object_id=object_id,
                w_error=abs(dims.w - truth.w),
                h_error=abs(dims.h - truth.h),
                w_est=dims.w,
                h_est=dims.h,
            )
        )
    return errors
