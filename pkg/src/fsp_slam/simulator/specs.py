"""Scenario description of a simulation: world, trajectory, sensors and seed,
loadable from and savable to JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Any

import numpy as np
from numpy import ndarray as A

from fsp_slam.geometry.camera import CameraIntrinsics
from fsp_slam.geometry.lie import Pose, Rotation
from fsp_slam.imu.residual import GRAVITY
from fsp_slam.parameterization.fsp import RectDims, rect_structural_points
from fsp_slam.utils.exceptions import ConfigError


@dataclass(frozen=True, eq=False)
class RectObject:
    """Rectangle with its origin corner at ``position``. In the object frame the
    width runs along x, the height along y and the front side faces +z.
    """

    id: int
    position: A
    orientation: Rotation
    w: float
    h: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        if not (self.w > 0 and self.h > 0):
            msg = f"Object {self.id}: dimensions must be positive, got w={self.w}, h={self.h}"
            raise ConfigError(msg)

    @property
    def pose(self) -> Pose:
        return Pose(self.position, self.orientation)

    @property
    def dims(self) -> RectDims:
        return RectDims(self.w, self.h)

    @property
    def normal(self) -> A:
        """Front-facing unit normal in the world frame"""
        return self.orientation.matrix[:, 2]

    def corners_world(self) -> A:
        """``(4, 3)``, ordered origin, +w, +w+h, +h"""
        return self.pose.apply(rect_structural_points(self.dims))

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "position": self.position.tolist(),
            "orientation": self.orientation.quat.tolist(),
            "w": self.w,
            "h": self.h,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RectObject:
        return cls(
            id=int(d["id"]),
            position=d["position"],
            orientation=Rotation(d["orientation"]),
            w=float(d["w"]),
            h=float(d["h"]),
        )


@dataclass
class WorldSpec:
    objects: list[RectObject]
    gravity: A = field(default_factory=lambda: GRAVITY.copy())

    def __post_init__(self) -> None:
        self.gravity = np.asarray(self.gravity, dtype=float).reshape(3)
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            msg = f"Object ids must be unique, got {ids}"
            raise ConfigError(msg)

    def object(self, object_id: int) -> RectObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        msg = f"No object with id {object_id}"
        raise KeyError(msg)

    def to_dict(self) -> dict[str, Any]:
        return {
            "objects": [o.to_dict() for o in self.objects],
            "gravity": self.gravity.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> WorldSpec:
        return cls(
            objects=[RectObject.from_dict(o) for o in d["objects"]],
            gravity=d.get("gravity", GRAVITY.tolist()),
        )


@dataclass(frozen=True)
class Sinusoid:
    amplitude: float
    #: Hz
    frequency: float
    #: rad
    phase: float = 0.0


@dataclass
class AxisProfile:
    """``offset + rate t + sum_i a_i sin(2 pi f_i t + phase_i)``"""

    offset: float = 0.0
    rate: float = 0.0
    terms: list[Sinusoid] = field(default_factory=list)

    def derivatives(self, t: float) -> tuple[float, float, float]:
        """Value, first and second derivative at ``t``"""
        value = self.offset + self.rate * t
        d1 = self.rate
        d2 = 0.0
        for s in self.terms:
            omega = 2 * np.pi * s.frequency
            arg = omega * t + s.phase
            value += s.amplitude * np.sin(arg)
            d1 += s.amplitude * omega * np.cos(arg)
            d2 -= s.amplitude * omega**2 * np.sin(arg)
        return float(value), float(d1), float(d2)

    def to_dict(self) -> dict[str, Any]:
        return {
            "offset": self.offset,
            "rate": self.rate,
            "terms": [[s.amplitude, s.frequency, s.phase] for s in self.terms],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> AxisProfile:
        return cls(
            offset=float(d.get("offset", 0.0)),
            rate=float(d.get("rate", 0.0)),
            terms=[Sinusoid(*map(float, term)) for term in d.get("terms", [])],
        )


@dataclass
class TrajectorySpec:
    x: AxisProfile
    y: AxisProfile
    z: AxisProfile
    yaw: AxisProfile
    duration: float
    #: Fixed elevation of the optical axis above the horizontal (rad)
    camera_tilt: float = 0.0

    def __post_init__(self) -> None:
        if not self.duration > 0:
            msg = f"Trajectory duration must be positive, got {self.duration}"
            raise ConfigError(msg)

    @property
    def axes(self) -> tuple[AxisProfile, AxisProfile, AxisProfile]:
        return self.x, self.y, self.z

    def to_dict(self) -> dict[str, Any]:
        return {
            "x": self.x.to_dict(),
            "y": self.y.to_dict(),
            "z": self.z.to_dict(),
            "yaw": self.yaw.to_dict(),
            "duration_s": self.duration,
            "camera_tilt_rad": self.camera_tilt,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> TrajectorySpec:
        return cls(
            x=AxisProfile.from_dict(d["x"]),
            y=AxisProfile.from_dict(d["y"]),
            z=AxisProfile.from_dict(d["z"]),
            yaw=AxisProfile.from_dict(d.get("yaw", {})),
            duration=float(d["duration_s"]),
            camera_tilt=float(d.get("camera_tilt_rad", 0.0)),
        )


@dataclass
class ImuSpec:
    rate_hz: float = 100.0
    #: Per-sample standard deviations
    sigma_a: float = 0.02
    sigma_g: float = 0.002
    bias_a: A = field(default_factory=lambda: np.zeros(3))
    bias_g: A = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        self.bias_a = np.asarray(self.bias_a, dtype=float).reshape(3)
        self.bias_g = np.asarray(self.bias_g, dtype=float).reshape(3)


@dataclass
class SensorSpec:
    camera: CameraIntrinsics
    camera_rate_hz: float = 10.0
    imu: ImuSpec = field(default_factory=ImuSpec)
    sigma_px: float = 1.0
    #: Objects seen at a smaller angle between the line of sight and the
    #: object plane are not detected
    min_incidence_deg: float = 10.0

    def __post_init__(self) -> None:
        if self.camera_rate_hz <= 0 or self.imu.rate_hz <= 0:
            msg = "Sensor rates must be positive"
            raise ConfigError(msg)
        ratio = self.imu.rate_hz / self.camera_rate_hz
        if ratio < 1 or not np.isclose(ratio, round(ratio)):
            msg = (
                f"The IMU rate ({self.imu.rate_hz} Hz) must be an integer multiple "
                f"of the camera rate ({self.camera_rate_hz} Hz)"
            )
            raise ConfigError(msg)
        if min(self.sigma_px, self.imu.sigma_a, self.imu.sigma_g) < 0:
            msg = "Noise standard deviations must be non-negative"
            raise ConfigError(msg)

    @property
    def imu_per_frame(self) -> int:
        return round(self.imu.rate_hz / self.camera_rate_hz)

    def noiseless(self) -> SensorSpec:
        """Same sensors without noise and biases"""
        return SensorSpec(
            camera=self.camera,
            camera_rate_hz=self.camera_rate_hz,
            imu=ImuSpec(rate_hz=self.imu.rate_hz, sigma_a=0.0, sigma_g=0.0),
            sigma_px=0.0,
            min_incidence_deg=self.min_incidence_deg,
        )

    def to_dict(self) -> dict[str, Any]:
        K = self.camera
        return {
            "camera": {
                "fx": K.fx,
                "fy": K.fy,
                "cx": K.cx,
                "cy": K.cy,
                "width": K.image_width,
                "height": K.image_height,
                "rate_hz": self.camera_rate_hz,
            },
            "imu": {
                "rate_hz": self.imu.rate_hz,
                "sigma_a": self.imu.sigma_a,
                "sigma_g": self.imu.sigma_g,
                "bias_a": self.imu.bias_a.tolist(),
                "bias_g": self.imu.bias_g.tolist(),
            },
            "sigma_px": self.sigma_px,
            "min_incidence_deg": self.min_incidence_deg,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SensorSpec:
        cam = d["camera"]
        imu = d.get("imu", {})
        return cls(
            camera=CameraIntrinsics(
                fx=float(cam["fx"]),
                fy=float(cam["fy"]),
                cx=float(cam["cx"]),
                cy=float(cam["cy"]),
                image_width=int(cam["width"]),
                image_height=int(cam["height"]),
            ),
            camera_rate_hz=float(cam.get("rate_hz", 10.0)),
            imu=ImuSpec(
                rate_hz=float(imu.get("rate_hz", 100.0)),
                sigma_a=float(imu.get("sigma_a", 0.02)),
                sigma_g=float(imu.get("sigma_g", 0.002)),
                bias_a=imu.get("bias_a", [0.0, 0.0, 0.0]),
                bias_g=imu.get("bias_g", [0.0, 0.0, 0.0]),
            ),
            sigma_px=float(d.get("sigma_px", 1.0)),
            min_incidence_deg=float(d.get("min_incidence_deg", 10.0)),
        )


@dataclass
class Scenario:
    world: WorldSpec
    trajectory: TrajectorySpec
    sensors: SensorSpec
    seed: int = 0

    def __post_init__(self) -> None:
        if self.seed < 0:
            msg = f"Seed must be an unsigned integer, got {self.seed}"
            raise ConfigError(msg)

    def to_dict(self) -> dict[str, Any]:
        return {
            "world": self.world.to_dict(),
            "trajectory": self.trajectory.to_dict(),
            "sensors": self.sensors.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Scenario:
        try:
            return cls(
                world=WorldSpec.from_dict(d["world"]),
                trajectory=TrajectorySpec.from_dict(d["trajectory"]),
                sensors=SensorSpec.from_dict(d["sensors"]),
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            msg = f"Invalid scenario: {e!r}"
            raise ConfigError(msg) from e

    @classmethod
    def load(cls, path: str | PathLike) -> Scenario:
        with Path(path).open() as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                msg = f"Scenario file {path} is not valid JSON: {e}"
                raise ConfigError(msg) from e
        return cls.from_dict(d)

    def save(self, path: str | PathLike) -> None:
        with Path(path).open("w") as f:
            json.dump(self.to_dict(), f, indent=2)


def _wall_object(object_id: int, corner: A, yaw: float, w: float, h: float) -> RectObject:
    """Upright rectangle whose front side faces the horizontal direction
    ``yaw`` (rad).
    """
    normal = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    up = np.array([0.0, 0.0, 1.0])
    width_dir = np.cross(up, normal)
    return RectObject(
        id=object_id,
        position=corner,
        orientation=Rotation.from_matrix(np.column_stack([width_dir, up, normal])),
        w=w,
        h=h,
    )


def default_scenario(seed: int = 0) -> Scenario:
    """Indoor flight of 60 s in a 12 m x 8 m room with doors, windows and
    cabinets on the walls.
    """
    half_x, half_y = 6.0, 4.0
    objects = [
        # wall at x = +6, facing -x
        _wall_object(0, [half_x, 1.5, 0.0], np.pi, 0.9, 2.0),
        _wall_object(1, [half_x, -1.0, 1.0], np.pi, 1.2, 1.0),
        # wall at y = +4, facing -y
        _wall_object(2, [-3.0, half_y, 0.9], -np.pi / 2, 1.4, 1.1),
        _wall_object(3, [0.5, half_y, 0.0], -np.pi / 2, 0.8, 1.8),
        _wall_object(4, [3.5, half_y, 1.2], -np.pi / 2, 0.6, 0.8),
        # wall at x = -6, facing +x
        _wall_object(5, [-half_x, -1.5, 0.0], 0.0, 1.0, 2.1),
        _wall_object(6, [-half_x, 1.5, 1.0], 0.0, 1.5, 1.2),
        # wall at y = -4, facing +y
        _wall_object(7, [3.0, -half_y, 0.8], np.pi / 2, 1.2, 1.2),
        _wall_object(8, [-0.5, -half_y, 0.0], np.pi / 2, 0.9, 2.0),
        _wall_object(9, [-3.5, -half_y, 1.4], np.pi / 2, 0.7, 0.5),
    ]
    trajectory = TrajectorySpec(
        x=AxisProfile(0.0, 0.0, [Sinusoid(1.5, 0.05), Sinusoid(0.3, 0.23, 0.4)]),
        y=AxisProfile(0.0, 0.0, [Sinusoid(1.0, 0.07, 1.0), Sinusoid(0.2, 0.31)]),
        z=AxisProfile(1.5, 0.0, [Sinusoid(0.3, 0.11, 0.3)]),
        yaw=AxisProfile(0.0, 2 * np.pi / 60.0, [Sinusoid(0.3, 0.08)]),
        duration=60.0,
    )
    sensors = SensorSpec(
        camera=CameraIntrinsics(
            fx=450.0, fy=450.0, cx=320.0, cy=240.0, image_width=640, image_height=480
        ),
        camera_rate_hz=10.0,
        imu=ImuSpec(rate_hz=100.0, sigma_a=0.02, sigma_g=0.002),
        sigma_px=1.0,
    )
    return Scenario(WorldSpec(objects), trajectory, sensors, seed=seed)
