import numpy as np
import pytest

from fsp_slam.geometry.camera import CameraIntrinsics
from fsp_slam.simulator.measurement_log import MeasurementLog
from fsp_slam.simulator.sensors import simulate
from fsp_slam.simulator.specs import Scenario

from .test_data import small_scenario_path

# Settings
# --------


def by_slow_marker(item):
    """Get items by slow marker"""
    return 1 if item.get_closest_marker("slow") is not None else 0


def pytest_collection_modifyitems(items):
    """Move slow items last"""
    # https://stackoverflow.com/a/61539510/
    items.sort(key=by_slow_marker)


def pytest_addoption(parser):
    parser.addoption("--no-slow", action="store_true", help="skip slow tests")


def pytest_runtest_setup(item):
    """Allow to skip slow tests"""
    # https://stackoverflow.com/a/47567535/
    if "slow" in item.keywords and item.config.getoption("--no-slow"):
        pytest.skip("skipped if --no-slow option is used")


# Fixtures
# --------


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def K() -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=450.0, fy=450.0, cx=320.0, cy=240.0, image_width=640, image_height=480
    )


@pytest.fixture()
def small_scenario() -> Scenario:
    return Scenario.load(small_scenario_path)


@pytest.fixture()
def noiseless_scenario(small_scenario) -> Scenario:
    small_scenario.sensors = small_scenario.sensors.noiseless()
    return small_scenario


@pytest.fixture(scope="session")
def small_log() -> MeasurementLog:
    return simulate(Scenario.load(small_scenario_path))


@pytest.fixture(scope="session")
def noiseless_log() -> MeasurementLog:
    scenario = Scenario.load(small_scenario_path)
    scenario.sensors = scenario.sensors.noiseless()
    return simulate(scenario)
