from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Any

import yaml

from fsp_slam.factor_graph.optimizer import OptimizerConfig
from fsp_slam.utils.exceptions import ConfigError

MODES = ("fsp", "fhp", "both")
FIRST_POSE_MODES = ("fix", "prior")


@dataclass
class EstimatorNoise:
    """Noise model assumed by the estimator, independent of the noise used to
    simulate the measurements.
    """

    #: Pixel standard deviation of a corner observation
    sigma_px: float = 1.0
    #: Per-sample IMU standard deviations
    sigma_a: float = 0.02
    sigma_g: float = 0.002
    #: Bias random walk densities (per square root second)
    walk_sigma_a: float = 1e-4
    walk_sigma_g: float = 1e-5
    #: Prior on the first bias
    bias_prior_sigma_a: float = 0.1
    bias_prior_sigma_g: float = 0.01
    #: Prior on the first pose, if it is not held fixed
    pose_prior_sigma_t: float = 1e-3
    pose_prior_sigma_r: float = 1e-3

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not value > 0:
                msg = f"Estimator noise {f.name} must be positive, got {value}"
                raise ConfigError(msg)


@dataclass
class RunConfig:
    scenario: Path
    #: Existing measurement log; simulated from the scenario if not given
    log: Path | None = None
    mode: str = "both"
    #: Run directory; a random name under ``runs/`` if not given
    out: Path | None = None
    #: Optimize every N frames while building the graph
    incremental: int | None = None
    #: Optimize once this many frames are in the graph (retried every frame
    #: until it succeeds); later poses are then predicted from the estimate
    init_solve_frames: int | None = 5
    #: Inverse depth seed of new landmarks (1/m)
    omega0: float = 0.5
    #: Overrides the seed of the scenario
    seed: int | None = None
    #: Gauge of the first pose: held fixed or tied by a prior
    first_pose: str = "fix"
    #: Optimize the landmarks alone before the joint solve
    refine_landmarks_first: bool = True
    #: Landmarks seen in fewer frames are reported as low parallax
    min_frames_for_parallax: int = 3
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    noise: EstimatorNoise = field(default_factory=EstimatorNoise)

    def __post_init__(self) -> None:
        self.scenario = Path(self.scenario)
        if self.log is not None:
            self.log = Path(self.log)
        if self.out is not None:
            self.out = Path(self.out)
        if isinstance(self.optimizer, dict):
            self.optimizer = OptimizerConfig(**self.optimizer)
        if isinstance(self.noise, dict):
            self.noise = EstimatorNoise(**self.noise)
        if self.mode not in MODES:
            msg = f"mode must be one of {MODES}, got {self.mode!r}"
            raise ConfigError(msg)
        if self.first_pose not in FIRST_POSE_MODES:
            msg = f"first_pose must be one of {FIRST_POSE_MODES}, got {self.first_pose!r}"
            raise ConfigError(msg)
        if self.incremental is not None and self.incremental < 1:
            msg = f"incremental must be at least 1, got {self.incremental}"
            raise ConfigError(msg)
        if self.init_solve_frames is not None and self.init_solve_frames < 3:
            msg = f"init_solve_frames must be at least 3, got {self.init_solve_frames}"
            raise ConfigError(msg)
        if not self.omega0 > 0:
            msg = f"omega0 must be positive, got {self.omega0}"
            raise ConfigError(msg)
        if self.seed is not None and self.seed < 0:
            msg = f"seed must be an unsigned integer, got {self.seed}"
            raise ConfigError(msg)

    @property
    def modes(self) -> list[str]:
        return ["fsp", "fhp"] if self.mode == "both" else [self.mode]

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        for key in ("scenario", "log", "out"):
            if d[key] is not None:
                d[key] = str(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RunConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            msg = f"Unknown run configuration keys: {sorted(unknown)}"
            raise ConfigError(msg)
        if "scenario" not in d:
            msg = "The run configuration needs a scenario"
            raise ConfigError(msg)
        try:
            return cls(**d)
        except TypeError as e:
            msg = f"Invalid run configuration: {e}"
            raise ConfigError(msg) from e

    @classmethod
    def from_yaml(cls, path: str | PathLike) -> RunConfig:
        with Path(path).open() as f:
            d = yaml.safe_load(f) or {}
        return cls.from_dict(d)

    def save_yaml(self, path: str | PathLike) -> None:
        with Path(path).open("w") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=False)
