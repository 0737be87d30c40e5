from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from fsp_slam.geometry.lie import Pose
from fsp_slam.imu.preintegration import ImuBias
from fsp_slam.parameterization.fhp import FHP_DIM, FhpPoint
from fsp_slam.parameterization.fsp import FSP_DIM, FspRect

VariableValue = Union[Pose, FspRect, FhpPoint, ImuBias]


class VariableKind(Enum):
    POSE = "pose"
    FSP = "fsp"
    FHP = "fhp"
    BIAS = "bias"

    @property
    def dim(self) -> int:
        """Manifold dimension"""
        return VARIABLE_DIMS[self]

    @property
    def value_type(self) -> type:
        return VALUE_TYPES[self]

    @property
    def is_landmark(self) -> bool:
        return self in (VariableKind.FSP, VariableKind.FHP)


VARIABLE_DIMS = {
    VariableKind.POSE: 6,
    VariableKind.FSP: FSP_DIM,
    VariableKind.FHP: FHP_DIM,
    VariableKind.BIAS: 6,
}

VALUE_TYPES: dict[VariableKind, type] = {
    VariableKind.POSE: Pose,
    VariableKind.FSP: FspRect,
    VariableKind.FHP: FhpPoint,
    VariableKind.BIAS: ImuBias,
}


@dataclass(frozen=True)
class VariableId:
    """Handle of a graph variable. Unique within its graph."""

    index: int
    kind: VariableKind = field(compare=False)

    def __lt__(self, other: VariableId) -> bool:
        return self.index < other.index

    def __str__(self) -> str:
        return f"{self.kind.value}#{self.index}"


def check_value(kind: VariableKind, value: VariableValue) -> None:
    """Raises `ValueError` if the value does not satisfy the invariants of the
    variable kind.
    """
    if not isinstance(value, kind.value_type):
        msg = f"{kind.value} variables hold {kind.value_type.__name__}, got {type(value).__name__}"
        raise TypeError(msg)
    if kind.is_landmark and not value.is_valid:  # type: ignore[union-attr]
        msg = f"Invalid initial value for {kind.value} variable: {value}"
        raise ValueError(msg)
