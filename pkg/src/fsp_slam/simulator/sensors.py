from __future__ import annotations

import numpy as np

from fsp_slam.geometry.camera import (
    DEPTH_EPSILON,
    CameraIntrinsics,
    Pixel,
    project_camera_points,
    to_camera_frame,
)
from fsp_slam.geometry.lie import Pose
from fsp_slam.imu.preintegration import ImuSample
from fsp_slam.parameterization.fsp import StructuralPointIndex
from fsp_slam.simulator.measurement_log import FrameRecord, MeasurementLog, Observation
from fsp_slam.simulator.specs import ImuSpec, RectObject, Scenario, TrajectorySpec, WorldSpec
from fsp_slam.simulator.trajectory import frame_times, sample_trajectory
from fsp_slam.utils.log import get_logger

logger = get_logger("Simulator")


def is_front_facing(obj: RectObject, camera: Pose, min_incidence_deg: float = 10.0) -> bool:
    """The camera is on the front side of the object plane and the line of
    sight to the object center is at least ``min_incidence_deg`` away from
    grazing.
    """
    center = obj.corners_world().mean(axis=0)
    to_camera = camera.translation - center
    distance = np.linalg.norm(to_camera)
    if distance == 0:
        return False
    return float(to_camera @ obj.normal) / distance > np.sin(np.deg2rad(min_incidence_deg))


def observe_object(
    obj: RectObject,
    K: CameraIntrinsics,
    camera: Pose,
    min_incidence_deg: float = 10.0,
) -> np.ndarray | None:
    """Noise-free pixels of the four corners, or None if the object is not
    visible.
    """
    if not is_front_facing(obj, camera, min_incidence_deg):
        return None
    p_cam = to_camera_frame(camera, obj.corners_world())
    if np.any(p_cam[:, 2] <= DEPTH_EPSILON):
        return None
    pixels = project_camera_points(K, p_cam)
    if not np.all(K.contains(pixels)):
        return None
    return pixels


def observe_frame(
    world: WorldSpec,
    K: CameraIntrinsics,
    camera_pose: Pose,
    sigma_px: float,
    rng: np.random.Generator,
    *,
    index: int = 0,
    t: float = 0.0,
    min_incidence_deg: float = 10.0,
) -> FrameRecord:
    """Noisy corner observations of all visible objects. Objects whose noisy
    corners leave the image are dropped.
    """
    observations = []
    for obj in world.objects:
        pixels = observe_object(obj, K, camera_pose, min_incidence_deg)
        if pixels is None:
            continue
        pixels = pixels + rng.normal(0.0, sigma_px, size=(4, 2))
        if not np.all(K.contains(pixels)):
            continue
        observations.extend(
            Observation(obj.id, j, Pixel(float(uv[0]), float(uv[1])))
            for j, uv in zip(StructuralPointIndex, pixels)
        )
    return FrameRecord(index=index, t=t, observations=observations, pose_gt=camera_pose)


def synthesize_imu(
    trajectory: TrajectorySpec,
    gravity: np.ndarray,
    imu: ImuSpec,
    rng: np.random.Generator,
) -> list[ImuSample]:
    """Accelerometer (specific force) and gyroscope samples at the IMU rate,
    with constant biases and white noise.
    """
    times = frame_times(trajectory.duration, imu.rate_hz)
    noise_a = rng.normal(0.0, imu.sigma_a, size=(len(times), 3))
    noise_g = rng.normal(0.0, imu.sigma_g, size=(len(times), 3))
    samples = []
    for t, n_a, n_g in zip(times, noise_a, noise_g):
        state = sample_trajectory(trajectory, float(t))
        R = state.pose.rotation.matrix
        accel = R.T @ (state.acceleration - gravity) + imu.bias_a + n_a
        gyro = state.angular_rate + imu.bias_g + n_g
        samples.append(ImuSample(float(t), accel, gyro))
    return samples


def simulate(scenario: Scenario) -> MeasurementLog:
    """Deterministic measurement log of the scenario. The same scenario
    (including seed) always gives the same log.
    """
    rng = np.random.default_rng(scenario.seed)
    sensors = scenario.sensors
    imu = synthesize_imu(scenario.trajectory, scenario.world.gravity, sensors.imu, rng)
    frames = []
    n_frames = len(frame_times(scenario.trajectory.duration, sensors.camera_rate_hz))
    for index in range(n_frames):
        # the frame timestamp is taken from the IMU clock so that both streams
        # share timestamps exactly
        t_frame = imu[index * sensors.imu_per_frame].t
        pose = sample_trajectory(scenario.trajectory, t_frame).pose
        frames.append(
            observe_frame(
                scenario.world,
                sensors.camera,
                pose,
                sensors.sigma_px,
                rng,
                index=index,
                t=t_frame,
                min_incidence_deg=sensors.min_incidence_deg,
            )
        )
    n_observed = len({i for f in frames for i in f.object_ids})
    logger.info(
        "Simulated %d frames, %d IMU samples, %d of %d objects observed",
        len(frames),
        len(imu),
        n_observed,
        len(scenario.world.objects),
    )
    return MeasurementLog(frames=frames, imu=imu)
