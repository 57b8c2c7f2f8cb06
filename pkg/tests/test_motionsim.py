import math

import numpy as np
import pytest
from scipy import stats

from slicemotion.acquisition import Orientation
from slicemotion.errors import RetryBudgetExhaustedError
from slicemotion.motionsim import (
    CSV_COLUMNS,
    DuplicateAbscissaError,
    MotionTrajectory,
    TooFewPointsError,
    TrajectoryConfig,
    angular_speeds,
    fit_smoothing_spline,
    read_trajectory_csv,
    simulate_trajectory,
    slice_normals,
    validate_bounds,
    write_trajectory_csv,
)

XS = np.linspace(0.0, 8.0, 9)
YS = np.array([0.0, 1.5, -0.5, 2.0, 1.0, 3.0, 0.5, 2.5, 1.0])


def test_zero_smoothing_interpolates():
    spline = fit_smoothing_spline(XS, YS, smoothing=0.0)
    np.testing.assert_allclose(spline(XS), YS, atol=1e-12)


def test_heavy_smoothing_tends_to_a_line():
    spline = fit_smoothing_spline(XS, YS, smoothing=1e9)
    slope, intercept = np.polyfit(XS, YS, 1)
    np.testing.assert_allclose(spline(XS), slope * XS + intercept, atol=1e-4)


def test_cross_validated_smoothing_stays_between_extremes():
    spline = fit_smoothing_spline(XS, YS)
    assert spline.smoothing > 0
    residual = np.sum((spline(XS) - YS) ** 2)
    slope, intercept = np.polyfit(XS, YS, 1)
    assert residual <= np.sum((slope * XS + intercept - YS) ** 2) + 1e-9


def test_spline_input_errors():
    with pytest.raises(DuplicateAbscissaError):
        fit_smoothing_spline([0.0, 1.0, 1.0], [0.0, 1.0, 2.0])
    with pytest.raises(TooFewPointsError):
        fit_smoothing_spline([0.0], [1.0])


def test_simulated_trajectory_respects_bounds():
    cfg = TrajectoryConfig(seed=5)
    traj = simulate_trajectory(cfg, 20, "axial")
    assert traj.params.shape == (20, 6)
    assert validate_bounds(traj, cfg) == []
    assert np.all(np.abs(traj.translations) < cfg.trans_bound)
    assert np.all(np.abs(traj.rotations.mean(axis=0)) <= cfg.mean_rot_bound + 1e-12)


def test_simulation_is_deterministic_per_label():
    cfg = TrajectoryConfig(seed=11)
    a = simulate_trajectory(cfg, 12, "coronal")
    b = simulate_trajectory(cfg, 12, "coronal")
    c = simulate_trajectory(cfg, 12, "sagittal")
    np.testing.assert_array_equal(a.params, b.params)
    assert not np.allclose(a.params, c.params)


def test_samples_follow_the_continuous_curves():
    traj = simulate_trajectory(TrajectoryConfig(seed=2), 10)
    for k, curve in enumerate(traj.curves):
        np.testing.assert_allclose(curve(traj.times_s), traj.params[:, k], atol=1e-12)


def test_static_trajectory_is_compliant():
    traj = MotionTrajectory.static(6)
    assert validate_bounds(traj, TrajectoryConfig()) == []
    assert all(T.is_identity() for T in traj.samples)


def test_bound_violations_are_reported():
    params = np.zeros((4, 6))
    params[:, 3] = 12.0
    params[:, 0] = np.radians([0.0, 20.0, 0.0, 20.0])
    traj = MotionTrajectory(np.arange(4) * 0.8, params)

    names = {v.name for v in validate_bounds(traj, TrajectoryConfig())}
    assert {"trans_bound", "mean_trans_bound", "max_instant_angular_velocity"} <= names


def test_angular_speeds():
    params = np.zeros((3, 6))
    params[:, 2] = [0.0, 0.1, 0.3]
    traj = MotionTrajectory(np.array([0.0, 0.5, 1.0]), params)
    np.testing.assert_allclose(angular_speeds(traj)[:, 2], [0.2, 0.4])


def test_impossible_bounds_exhaust_retries():
    cfg = TrajectoryConfig(trans_bound=1e-9, max_retries=3)
    with pytest.raises(RetryBudgetExhaustedError):
        simulate_trajectory(cfg, 8)


def test_slice_normals_follow_rotation():
    params = np.zeros((2, 6))
    params[1, 0] = math.pi / 2
    traj = MotionTrajectory(np.array([0.0, 1.0]), params)
    normals = slice_normals(traj, Orientation.AXIAL)
    np.testing.assert_allclose(normals[0], (0, 0, 1), atol=1e-12)
    np.testing.assert_allclose(normals[1], (0, -1, 0), atol=1e-12)


def test_trajectory_csv(tmp_path):
    traj = simulate_trajectory(TrajectoryConfig(seed=3), 6)
    write_trajectory_csv(traj, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == ",".join(CSV_COLUMNS)

    loaded = read_trajectory_csv(tmp_path / "t.csv")
    np.testing.assert_allclose(loaded.params, traj.params, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(loaded.times_s, traj.times_s)


def seeded_trajectories(n: int, n_slices: int = 12) -> list[tuple[Orientation, MotionTrajectory]]:
    orientations = list(Orientation)
    trajectories = []
    for seed in range(n):
        o = orientations[seed % 3]
        trajectories.append((o, simulate_trajectory(TrajectoryConfig(seed=seed), n_slices, o.value)))
    return trajectories


def check_default_bounds(trajectories) -> None:
    cfg = TrajectoryConfig()
    for _, traj in trajectories:
        assert validate_bounds(traj, cfg) == []
        assert np.all(np.abs(traj.rotations.mean(axis=0)) <= math.pi / 4 + 1e-12)
        assert np.all(np.abs(traj.translations.mean(axis=0)) <= 2.0 + 1e-12)
        assert np.all(np.abs(traj.translations) < 10.0)
        assert np.all(angular_speeds(traj).mean(axis=0) <= math.radians(5.0))


def check_mean_angles_are_uniform(trajectories) -> None:
    means = np.concatenate([traj.rotations.mean(axis=0) for _, traj in trajectories])
    result = stats.kstest(means, stats.uniform(loc=-math.pi / 4, scale=math.pi / 2).cdf)
    assert result.pvalue > 0.01


def check_normals_cover_every_octant(trajectories) -> None:
    normals = np.concatenate([slice_normals(traj, o) for o, traj in trajectories])
    # Plane normals are unoriented
    normals = np.concatenate([normals, -normals])
    octant = (normals > 0) @ np.array([1, 2, 4])
    fractions = np.bincount(octant, minlength=8) / len(octant)
    assert np.all(fractions >= 0.01)


def test_many_seeds_respect_bounds_and_cover_the_sphere():
    trajectories = seeded_trajectories(150)
    check_default_bounds(trajectories)
    check_mean_angles_are_uniform(trajectories)
    check_normals_cover_every_octant(trajectories)


@pytest.mark.slow
def test_thousand_default_trajectories():
    trajectories = seeded_trajectories(1000)
    check_default_bounds(trajectories)
    check_mean_angles_are_uniform(trajectories)
    check_normals_cover_every_octant(trajectories)


def test_degenerate_walk_is_static():
    cfg = TrajectoryConfig(
        delta_rot_bound=0.0,
        delta_trans_bound=0.0,
        mean_rot_bound=0.0,
        mean_trans_bound=0.0,
        smoothing=0.0,
    )
    traj = simulate_trajectory(cfg, 8)
    np.testing.assert_allclose(traj.params, 0.0, atol=1e-12)
