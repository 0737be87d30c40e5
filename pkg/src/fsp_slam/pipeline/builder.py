"""Construction of the factor graph from a measurement log, one frame at a
time, for rectangle (FSP) or independent point (FHP) landmarks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy import ndarray as A

from fsp_slam.factor_graph.factors import (
    BiasPriorFactor,
    BiasWalkFactor,
    FhpReprojectionFactor,
    FspReprojectionFactor,
    ImuTernaryFactor,
    PosePriorFactor,
)
from fsp_slam.factor_graph.graph import FactorGraph
from fsp_slam.factor_graph.variables import VariableId, VariableKind
from fsp_slam.geometry.camera import CameraIntrinsics
from fsp_slam.geometry.lie import Pose
from fsp_slam.imu.preintegration import ImuBias, ImuNoise, Preintegrated, preintegrate
from fsp_slam.imu.residual import (
    bias_walk_information,
    imu_ternary_covariance,
    predict_next_pose,
    propagate_pose,
)
from fsp_slam.metrics.landmark_errors import FhpEstimate, FspEstimate, LandmarkEstimate
from fsp_slam.parameterization.fhp import init_fhp
from fsp_slam.parameterization.fsp import FspRect
from fsp_slam.parameterization.initialization import init_fsp_from_single_view
from fsp_slam.pipeline.config import RunConfig
from fsp_slam.simulator.measurement_log import FrameRecord, MeasurementLog
from fsp_slam.utils.exceptions import ConfigError, DegenerateView
from fsp_slam.utils.log import get_logger


@dataclass
class LandmarkTrack:
    """Observations of one object and the graph variables estimating it"""

    object_id: int
    #: Corner pixels ``(4, 2)`` by frame index
    observations: dict[int, A] = field(default_factory=dict)
    #: One FSP variable, or four FHP variables in corner order
    variables: list[VariableId] = field(default_factory=list)
    #: Initialization failed, the object is not estimated
    degenerate: bool = False

    @property
    def frames(self) -> list[int]:
        return sorted(self.observations)

    @property
    def anchor_frame(self) -> int:
        return min(self.observations)

    @property
    def is_estimated(self) -> bool:
        return bool(self.variables)


def _information(covariance: A) -> A:
    info = np.linalg.inv(covariance)
    return 0.5 * (info + info.T)


class GraphBuilder:
    def __init__(
        self,
        K: CameraIntrinsics,
        gravity: A,
        config: RunConfig,
        mode: str,
    ):
        """Builds the graph frame by frame.

        Args:
            K: Camera intrinsics
            gravity: Gravity in the world frame
            config: Run configuration (noise model, landmark seed, gauge)
            mode: ``fsp`` or ``fhp``
        """
        if mode not in ("fsp", "fhp"):
            msg = f"Landmark mode must be fsp or fhp, got {mode!r}"
            raise ConfigError(msg)
        self.K = K
        self.gravity = np.asarray(gravity, dtype=float)
        self.config = config
        self.mode = mode
        self.graph = FactorGraph()
        self.pose_ids: list[VariableId] = []
        self.bias_ids: list[VariableId] = []
        self.times: list[float] = []
        #: Preintegration of the interval ending at frame ``k`` is at ``k - 1``
        self.preintegrations: list[Preintegrated] = []
        self.tracks: dict[int, LandmarkTrack] = {}
        self.logger = get_logger("GraphBuilder")
        noise = config.noise
        self._imu_noise = ImuNoise(sigma_a=noise.sigma_a, sigma_g=noise.sigma_g)
        self._reprojection_info = {
            "fsp": np.eye(8) / noise.sigma_px**2,
            "fhp": np.eye(2) / noise.sigma_px**2,
        }[mode]

    @property
    def n_frames(self) -> int:
        return len(self.pose_ids)

    @property
    def landmark_kind(self) -> VariableKind:
        return VariableKind.FSP if self.mode == "fsp" else VariableKind.FHP

    def add_log(self, log: MeasurementLog) -> None:
        for frame in log.frames:
            self.add_frame(frame, log)

    def add_frame(self, frame: FrameRecord, log: MeasurementLog) -> None:
        """Add the pose and bias of the frame with their inertial factors, and
        its corner observations.
        """
        k = self.n_frames
        if frame.index != k:
            msg = f"Frames must be added in order: expected frame {k}, got {frame.index}"
            raise ValueError(msg)
        if k > 0:
            samples = log.imu_between(self.times[-1], frame.t)
            self.preintegrations.append(
                preintegrate(samples, ImuBias.zero(), self._imu_noise)
            )
        self.times.append(frame.t)
        self.pose_ids.append(
            self.graph.add_variable(VariableKind.POSE, self._initial_pose(frame))
        )
        self._add_bias()
        if k == 0:
            self._add_gauge()
        if k >= 2:
            self._add_imu_factor(k)
        for object_id in frame.object_ids:
            corners = frame.corners_of(object_id)
            if corners is not None:
                self._observe(object_id, k, corners)

    def _initial_pose(self, frame: FrameRecord) -> Pose:
        k = self.n_frames
        if k == 0:
            if frame.pose_gt is None:
                msg = "The first frame needs a ground truth pose, it defines the world frame"
                raise ConfigError(msg)
            return frame.pose_gt
        bias = self.graph.value(self.bias_ids[-1])
        if k == 1:
            # at rest until the first solve estimates the velocity
            p0 = self.graph.value(self.pose_ids[0])
            return propagate_pose(p0, np.zeros(3), self.preintegrations[0], bias, self.gravity)[0]  # type: ignore[arg-type]
        return predict_next_pose(
            self.graph.value(self.pose_ids[k - 2]),  # type: ignore[arg-type]
            self.graph.value(self.pose_ids[k - 1]),  # type: ignore[arg-type]
            self.preintegrations[k - 2],
            self.preintegrations[k - 1],
            bias,  # type: ignore[arg-type]
            self.gravity,
        )

    def _add_bias(self) -> None:
        k = self.n_frames - 1
        value = ImuBias.zero() if k == 0 else self.graph.value(self.bias_ids[-1])
        bias_id = self.graph.add_variable(VariableKind.BIAS, value)
        self.bias_ids.append(bias_id)
        if k > 0:
            noise = self.config.noise
            self.graph.add_factor(
                BiasWalkFactor(
                    (self.bias_ids[k - 1], bias_id),
                    bias_walk_information(
                        self.preintegrations[k - 1].dt, noise.walk_sigma_a, noise.walk_sigma_g
                    ),
                )
            )

    def _add_gauge(self) -> None:
        noise = self.config.noise
        self.graph.add_factor(
            BiasPriorFactor(
                self.bias_ids[0],
                ImuBias.zero(),
                np.diag(
                    [1 / noise.bias_prior_sigma_a**2] * 3
                    + [1 / noise.bias_prior_sigma_g**2] * 3
                ),
            )
        )
        first = self.pose_ids[0]
        if self.config.first_pose == "fix":
            self.graph.fix_variable(first)
        else:
            self.graph.add_factor(
                PosePriorFactor(
                    first,
                    self.graph.value(first),  # type: ignore[arg-type]
                    np.diag(
                        [1 / noise.pose_prior_sigma_t**2] * 3
                        + [1 / noise.pose_prior_sigma_r**2] * 3
                    ),
                )
            )

    def _add_imu_factor(self, k: int) -> None:
        pre1 = self.preintegrations[k - 2]
        pre2 = self.preintegrations[k - 1]
        poses = self.pose_ids[k - 2 : k + 1]
        covariance = imu_ternary_covariance(
            pre1,
            pre2,
            self.graph.value(poses[0]).rotation,  # type: ignore[union-attr]
            self.graph.value(poses[1]).rotation,  # type: ignore[union-attr]
        )
        self.graph.add_factor(
            ImuTernaryFactor(
                poses,
                self.bias_ids[k - 2],
                pre1,
                pre2,
                _information(covariance),
                self.gravity,
            )
        )

    def _observe(self, object_id: int, k: int, corners: A) -> None:
        track = self.tracks.setdefault(object_id, LandmarkTrack(object_id))
        track.observations[k] = corners
        if track.degenerate:
            return
        if track.is_estimated:
            self._add_reprojection(track, k)
            return
        # the inverse depth is not observable from a single view
        if len(track.observations) < 2:
            return
        try:
            self._create_landmark(track)
        except DegenerateView as e:
            self.logger.warning("Cannot initialize object %d: %s", object_id, e)
            track.degenerate = True
            return
        for frame in track.frames:
            self._add_reprojection(track, frame)

    def _create_landmark(self, track: LandmarkTrack) -> None:
        anchor = track.anchor_frame
        anchor_id = self.pose_ids[anchor]
        corners = track.observations[anchor]
        omega0 = self.config.omega0
        if self.mode == "fsp":
            rect = init_fsp_from_single_view(self.K, corners, omega0, anchor_id)
            track.variables = [self.graph.add_variable(VariableKind.FSP, rect)]
        else:
            track.variables = [
                self.graph.add_variable(
                    VariableKind.FHP, init_fhp(self.K, corners[j], omega0, anchor_id)
                )
                for j in range(4)
            ]

    def _add_reprojection(self, track: LandmarkTrack, k: int) -> None:
        camera_id = self.pose_ids[k]
        anchor_id = self.pose_ids[track.anchor_frame]
        corners = track.observations[k]
        if self.mode == "fsp":
            self.graph.add_factor(
                FspReprojectionFactor(
                    camera_id,
                    anchor_id,
                    track.variables[0],
                    corners,
                    self.K,
                    self._reprojection_info,
                )
            )
            return
        for j, var in enumerate(track.variables):
            self.graph.add_factor(
                FhpReprojectionFactor(
                    camera_id, anchor_id, var, corners[j], self.K, self._reprojection_info
                )
            )

    # Results
    # -------

    @property
    def n_landmarks(self) -> int:
        return sum(track.is_estimated for track in self.tracks.values())

    def estimated_poses(self) -> list[Pose]:
        return [self.graph.value(v) for v in self.pose_ids]  # type: ignore[misc]

    def landmark_estimates(self) -> dict[int, LandmarkEstimate]:
        estimates: dict[int, LandmarkEstimate] = {}
        for object_id, track in sorted(self.tracks.items()):
            if not track.is_estimated:
                continue
            anchor = self.graph.value(self.pose_ids[track.anchor_frame])
            values = [self.graph.value(v) for v in track.variables]
            if self.mode == "fsp":
                estimates[object_id] = FspEstimate(anchor, values[0])  # type: ignore[arg-type]
            else:
                estimates[object_id] = FhpEstimate([anchor] * 4, values)  # type: ignore[arg-type, list-item]
        return estimates

    def fsp_estimates(self) -> dict[int, FspRect]:
        return {
            object_id: estimate.rect
            for object_id, estimate in self.landmark_estimates().items()
            if isinstance(estimate, FspEstimate)
        }

    def unestimated(self) -> list[int]:
        return sorted(i for i, t in self.tracks.items() if not t.is_estimated)

    def low_parallax(self, min_frames: int) -> list[int]:
        return sorted(
            i
            for i, t in self.tracks.items()
            if t.is_estimated and len(t.observations) < min_frames
        )
