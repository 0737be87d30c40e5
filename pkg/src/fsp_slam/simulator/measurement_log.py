"""Synthetic measurements: corner observations per camera frame and the IMU
stream, stored as JSON lines (one ``frame`` or ``imu`` record per line,
ordered by time).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from os import PathLike
from pathlib import Path
from typing import Any, Iterator

import numpy as np
from numpy import ndarray as A

from fsp_slam.geometry.camera import Pixel
from fsp_slam.geometry.lie import Pose
from fsp_slam.imu.preintegration import ImuSample
from fsp_slam.parameterization.fsp import StructuralPointIndex
from fsp_slam.utils.exceptions import ConfigError, EmptyBuffer

#: Tolerance when matching IMU timestamps to frame timestamps (s)
TIME_TOL = 1e-9


@dataclass(frozen=True)
class Observation:
    object_id: int
    corner: StructuralPointIndex
    pixel: Pixel


@dataclass
class FrameRecord:
    index: int
    t: float
    observations: list[Observation] = field(default_factory=list)
    #: Ground truth camera pose
    pose_gt: Pose | None = None

    def __post_init__(self) -> None:
        keys = [(o.object_id, int(o.corner)) for o in self.observations]
        if len(set(keys)) != len(keys):
            msg = f"Frame {self.index} observes a corner more than once"
            raise ValueError(msg)

    @property
    def object_ids(self) -> list[int]:
        return sorted({o.object_id for o in self.observations})

    def corners_of(self, object_id: int) -> A | None:
        """Pixels of the four corners in corner order, ``(4, 2)``, or None if
        the object is not fully observed in this frame.
        """
        pixels = {
            int(o.corner): o.pixel.as_array()
            for o in self.observations
            if o.object_id == object_id
        }
        if len(pixels) != 4:
            return None
        return np.array([pixels[j] for j in StructuralPointIndex])

    def to_record(self) -> dict[str, Any]:
        record: dict[str, Any] = {"type": "frame", "index": self.index, "t": self.t}
        if self.pose_gt is not None:
            record["pose_gt"] = self.pose_gt.to_vector().tolist()
        record["observations"] = [
            {
                "object_id": o.object_id,
                "corner": int(o.corner),
                "u": o.pixel.u,
                "v": o.pixel.v,
            }
            for o in self.observations
        ]
        return record

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> FrameRecord:
        pose_gt = record.get("pose_gt")
        return cls(
            index=int(record["index"]),
            t=float(record["t"]),
            observations=[
                Observation(
                    object_id=int(o["object_id"]),
                    corner=StructuralPointIndex(int(o["corner"])),
                    pixel=Pixel(float(o["u"]), float(o["v"])),
                )
                for o in record["observations"]
            ],
            pose_gt=None if pose_gt is None else Pose.from_vector(pose_gt),
        )


def _imu_record(sample: ImuSample) -> dict[str, Any]:
    return {
        "type": "imu",
        "t": sample.t,
        "accel": sample.accel.tolist(),
        "gyro": sample.gyro.tolist(),
    }


@dataclass
class MeasurementLog:
    frames: list[FrameRecord]
    imu: list[ImuSample]

    @cached_property
    def _imu_times(self) -> A:
        return np.array([s.t for s in self.imu])

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def imu_between(self, t0: float, t1: float) -> list[ImuSample]:
        """IMU samples with ``t0 <= t <= t1`` (both ends included).

        Raises:
            EmptyBuffer: If there is no sample in the interval
        """
        lo = np.searchsorted(self._imu_times, t0 - TIME_TOL, side="left")
        hi = np.searchsorted(self._imu_times, t1 + TIME_TOL, side="right")
        if hi <= lo:
            msg = f"No IMU samples between {t0} and {t1}"
            raise EmptyBuffer(msg)
        return self.imu[lo:hi]

    @property
    def object_ids(self) -> list[int]:
        return sorted({i for frame in self.frames for i in frame.object_ids})

    def frames_observing(self, object_id: int) -> list[int]:
        """Indices of the frames in which all corners of the object are seen"""
        return [
            frame.index
            for frame in self.frames
            if frame.corners_of(object_id) is not None
        ]

    def ground_truth_poses(self) -> list[Pose]:
        poses = [frame.pose_gt for frame in self.frames]
        if any(p is None for p in poses):
            msg = "The log does not contain ground truth poses"
            raise ValueError(msg)
        return poses  # type: ignore[return-value]

    def records(self) -> Iterator[dict[str, Any]]:
        """Records ordered by time; IMU samples come before a frame with the
        same timestamp.
        """
        i_imu = 0
        for frame in self.frames:
            while i_imu < len(self.imu) and self.imu[i_imu].t <= frame.t + TIME_TOL:
                yield _imu_record(self.imu[i_imu])
                i_imu += 1
            yield frame.to_record()
        for sample in self.imu[i_imu:]:
            yield _imu_record(sample)

    def save(self, path: str | PathLike) -> None:
        with Path(path).open("w") as f:
            for record in self.records():
                f.write(json.dumps(record) + "\n")

    @classmethod
    def load(cls, path: str | PathLike) -> MeasurementLog:
        frames = []
        imu = []
        with Path(path).open() as f:
            for i_line, line in enumerate(f):
                if not line.strip():
                    continue
                record = json.loads(line)
                kind = record.get("type")
                if kind == "frame":
                    frames.append(FrameRecord.from_record(record))
                elif kind == "imu":
                    imu.append(ImuSample(record["t"], record["accel"], record["gyro"]))
                else:
                    msg = f"{path}:{i_line + 1}: unknown record type {kind!r}"
                    raise ConfigError(msg)
        return cls(frames=frames, imu=imu)
