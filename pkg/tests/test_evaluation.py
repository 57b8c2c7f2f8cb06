import math

import numpy as np
import pytest

from slicemotion.evaluation import (
    ConstantReferenceError,
    MetricError,
    align_to_reference,
    build_report,
    dssim_map,
    motion_errors,
    nrmse,
    paired_comparison,
    report_to_csv,
    ssim,
    wrap_degrees,
)
from slicemotion.evaluation.report import PER_SLICE_COLUMNS
from slicemotion.geometry import RigidTransform, geodesic_slice_loss
from slicemotion.svr import RegistrationConfig
from slicemotion.volume import resample

from conftest import degrees


def test_wrap_degrees():
    np.testing.assert_allclose(
        wrap_degrees([190.0, -180.0, 180.0, 0.0, -190.0]),
        [-170.0, 180.0, 180.0, 0.0, 170.0],
    )


def test_single_axis_error():
    true = [RigidTransform.identity()] * 2
    est = [RigidTransform(theta=degrees(3.0, 0.0, 0.0)), RigidTransform.identity()]
    report = motion_errors(true, est, [True, False])
    assert report.n_slices == 1
    assert report.mae_rot_deg == pytest.approx(1.0)
    assert report.mae_rot_axes_deg == pytest.approx((3.0, 0.0, 0.0))
    assert report.mean_geodesic_deg == pytest.approx(3.0)
    assert report.mae_trans_mm == 0.0


def test_errors_are_aggregated_per_axis():
    true = [RigidTransform.identity()] * 2
    est = [
        RigidTransform(theta=degrees(1.0, 0.0, 0.0), d=(0.0, 0.0, -2.0)),
        RigidTransform(theta=degrees(3.0, 0.0, 0.0), d=(0.0, 0.0, 2.0)),
    ]
    report = motion_errors(true, est)
    assert report.mae_rot_axes_deg[0] == pytest.approx(2.0)
    assert report.rmse_rot_deg == pytest.approx(math.sqrt(5.0) / 3)
    assert report.mae_trans_axes_mm == pytest.approx((0.0, 0.0, 2.0))
    assert report.rmse_trans_mm == pytest.approx(2.0 / 3)
    assert [s.index for s in report.per_slice] == [0, 1]


def test_rotation_errors_wrap_around():
    true = [RigidTransform(theta=degrees(-179.0, 0.0, 0.0))]
    est = [RigidTransform(theta=degrees(179.0, 0.0, 0.0))]
    report = motion_errors(true, est)
    assert report.per_slice[0].rot_error_deg[0] == pytest.approx(-2.0)
    assert report.mean_geodesic_deg == pytest.approx(2.0)


def test_motion_error_input_checks():
    T = [RigidTransform.identity()] * 3
    with pytest.raises(MetricError):
        motion_errors(T, T[:2])
    with pytest.raises(MetricError):
        motion_errors(T, T, [True, False])
    with pytest.raises(MetricError):
        motion_errors(T, T, [False] * 3)


def test_image_metrics():
    rng = np.random.default_rng(0)
    v = rng.uniform(size=(12, 12, 12))
    assert ssim(v, v) == pytest.approx(1.0)
    assert ssim(v, rng.uniform(size=v.shape)) < 0.5
    assert nrmse(v, v) == 0.0

    # The Gaussian window spans 11 voxels
    with pytest.raises(MetricError):
        ssim(v[:8], v[:8])

    ref = np.arange(5.0)
    assert nrmse(ref + 1.0, ref) == pytest.approx(0.25)
    assert nrmse(ref + 100.0, ref) == 1.0

    with pytest.raises(ConstantReferenceError):
        nrmse(v, np.ones_like(v))
    with pytest.raises(MetricError):
        ssim(v, v[:4])


def test_dssim_of_identical_volumes(phantom):
    d = dssim_map(phantom, phantom)
    assert d.grid == phantom.grid
    np.testing.assert_allclose(d.data, 0.0, atol=1e-9)


def test_alignment_undoes_a_rigid_offset(phantom):
    T = RigidTransform(theta=np.radians((4.0, -3.0, 5.0)), d=(3.0, 2.0, -2.0), center=phantom.grid.center)
    moving = resample(phantom, T)
    cfg = RegistrationConfig(max_evals=400)

    aligned, estimate = align_to_reference(moving, phantom, cfg)
    assert aligned.grid == phantom.grid
    identity = RigidTransform.identity(phantom.grid.center)
    assert geodesic_slice_loss(T, estimate) < 0.5 * geodesic_slice_loss(T, identity)


def test_paired_comparison():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    b = a - np.array([0.5, 0.6, 0.4, 0.5])
    single = paired_comparison(a, b)
    assert single.n == 4
    assert single.mean_difference == pytest.approx(0.5)
    assert single.t_statistic > 0
    assert single.significant

    corrected = paired_comparison(a, b, n_comparisons=3)
    assert corrected.p_corrected == pytest.approx(min(1.0, 3 * single.p_value))

    with pytest.raises(MetricError):
        paired_comparison(a, b[:3])
    with pytest.raises(MetricError):
        paired_comparison([1.0], [2.0])
    with pytest.raises(MetricError):
        paired_comparison(a, b, n_comparisons=0)


def test_report_of_stacks_and_volume(phantom, static_stacks):
    axial = static_stacks[0]
    shifted = [RigidTransform(d=(2.0, 0.0, 0.0), center=axial.center_mm)] * axial.n_slices
    stacks = [axial.replace(est_transforms=shifted), *static_stacks[1:]]

    report, dssim = build_report(stacks, phantom, phantom, align=False)
    assert set(report.motion) == {"axial", "coronal", "sagittal", "all"}
    assert report.motion["axial"].mae_trans_mm == pytest.approx(2.0 / 3)
    assert report.motion["coronal"].mae_trans_mm == 0.0
    scored = sum(int(s.brain_mask.sum()) for s in stacks)
    expected = 2.0 * axial.brain_mask.sum() / scored
    assert report.motion["all"].mae_trans_axes_mm[0] == pytest.approx(expected)

    assert report.image.ssim == pytest.approx(1.0)
    assert report.image.nrmse == 0.0
    np.testing.assert_allclose(dssim.data, 0.0, atol=1e-9)

    lines = report_to_csv(report).splitlines()
    assert lines[0] == ",".join(PER_SLICE_COLUMNS)
    assert len(lines) == 1 + scored
    assert lines[1].startswith("axial,")


def test_report_of_a_single_stack(static_stacks):
    report, dssim = build_report(static_stacks[:1])
    assert set(report.motion) == {"axial"}
    assert report.image is None
    assert dssim is None
