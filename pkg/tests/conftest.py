import math

import numpy as np
import pytest

from slicemotion.acquisition import AcquisitionConfig, Orientation, SliceStack, acquire_stack
from slicemotion.estimator import EstimatorConfig, EstimatorParams, TrainConfig
from slicemotion.motionsim import MotionTrajectory
from slicemotion.sda import SdaConfig
from slicemotion.volume import PhantomSpec, Volume3D, make_phantom

# 16³ voxels of 6 mm: slice pixels and slice positions land on voxel centers
SPACING_MM = 6.0
SIZE = 16
N_SLICES = 8


def small_phantom_spec(**update) -> PhantomSpec:
    return PhantomSpec(dims=(SIZE,) * 3, spacing_mm=SPACING_MM, size_mm=80.0, **update)


def small_acquisition(**update) -> AcquisitionConfig:
    values = dict(
        n_slices=N_SLICES,
        thickness_mm=SPACING_MM,
        in_plane_shape=(SIZE, SIZE),
        in_plane_spacing_mm=SPACING_MM,
    )
    return AcquisitionConfig(**(values | update))


def small_estimator(**update) -> EstimatorConfig:
    values = dict(
        image_size=SIZE,
        channels=(2, 4),
        hidden_size=4,
        embedding=4,
        head_hidden=4,
        volume_size=SIZE,
        volume_spacing_mm=SPACING_MM,
    )
    return EstimatorConfig(**(values | update))


def small_train_config(**update) -> TrainConfig:
    values = dict(
        n_recurrences=1,
        sets_per_epoch=1,
        validation_sets=1,
        n_epochs=1,
        estimator=small_estimator(),
        acquisition=small_acquisition(),
        phantom=small_phantom_spec(),
        sda=SdaConfig(sigma_first_mm=9.0, sigma_last_mm=6.0),
    )
    return TrainConfig(**(values | update))


def constant_trajectory(n: int, theta_deg=(0.0, 0.0, 0.0), d_mm=(0.0, 0.0, 0.0)) -> MotionTrajectory:
    params = np.tile(np.concatenate([np.radians(theta_deg), d_mm]), (n, 1))
    return MotionTrajectory(np.arange(n) * 0.8, params)


@pytest.fixture(scope="session")
def phantom() -> Volume3D:
    return make_phantom(small_phantom_spec())


@pytest.fixture(scope="session")
def acquisition() -> AcquisitionConfig:
    return small_acquisition()


@pytest.fixture(scope="session")
def static_stacks(phantom: Volume3D, acquisition: AcquisitionConfig) -> list[SliceStack]:
    traj = MotionTrajectory.static(acquisition.n_slices)
    return [acquire_stack(phantom, traj, o, acquisition) for o in Orientation]


@pytest.fixture(scope="session")
def estimator_params() -> EstimatorParams:
    return EstimatorParams.initialize(small_estimator(), seed=1)


@pytest.fixture(autouse=True)
def isolated_log_file(tmp_path_factory, monkeypatch):
    path = tmp_path_factory.mktemp("logs") / "slicemotion.jsonl"
    monkeypatch.setattr("slicemotion.logging.LOG_PATH", path)
    return path


def degrees(*values: float) -> np.ndarray:
    return np.array([math.radians(v) for v in values])
