import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from slicemotion.estimator import (
    Checkpoint,
    CheckpointError,
    EpochRecord,
    EstimatorParams,
    RmsProp,
    TrainState,
    backprop_motion,
    consistency_term,
    dump_checkpoint,
    geodesic_loss_grad,
    history_to_csv,
    load_checkpoint,
    loss_total,
    make_sample,
    parameter_mse,
    parse_checkpoint,
    resume_training,
    save_checkpoint,
    train_toy,
)
from slicemotion.estimator.tensor import parameter
from slicemotion.estimator.train import HISTORY_COLUMNS, _update_schedule
from slicemotion.evaluation import motion_errors
from slicemotion.geometry import LossConfig, RigidTransform, apply_to_point, geodesic_slice_loss
from slicemotion.sda import SdaConfig
from slicemotion.svr import PipelineConfig, run_coarse_to_fine

from conftest import small_estimator, small_train_config


def perturbed(T: RigidTransform, rng: np.random.Generator, scale: float = 0.1) -> RigidTransform:
    return T.with_params(T.params + scale * rng.normal(size=6))


def test_geodesic_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    cfg = LossConfig(gamma=0.5)
    T = RigidTransform(theta=(0.2, -0.1, 0.3), d=(1.0, 2.0, -1.0), center=(4.0, 0.0, 2.0))
    T_hat = perturbed(T, rng, 0.2)

    value, grad = geodesic_loss_grad(T, T_hat, cfg)
    assert value == pytest.approx(geodesic_slice_loss(T, T_hat, cfg))

    eps = 1e-6
    expected = np.zeros(6)
    for k in range(6):
        step = np.zeros(6)
        step[k] = eps
        hi = geodesic_slice_loss(T, T_hat.with_params(T_hat.params + step), cfg)
        lo = geodesic_slice_loss(T, T_hat.with_params(T_hat.params - step), cfg)
        expected[k] = (hi - lo) / (2 * eps)
    np.testing.assert_allclose(grad, expected, rtol=1e-5, atol=1e-8)


def test_geodesic_gradient_vanishes_at_the_truth():
    T = RigidTransform(theta=(0.1, 0.2, 0.3), d=(1.0, 1.0, 1.0))
    value, grad = geodesic_loss_grad(T, T)
    assert value == 0.0
    np.testing.assert_array_equal(grad, 0.0)


def test_parameter_mse():
    true = [RigidTransform.identity()] * 2
    est = [RigidTransform(d=(3.0, 0.0, 0.0)), RigidTransform(d=(0.0, 5.0, 0.0))]
    value, grad = parameter_mse(true, est, np.array([True, False]))
    assert value == pytest.approx(9.0 / 6.0)
    np.testing.assert_allclose(grad[0], [0, 0, 0, 1.0, 0, 0])
    np.testing.assert_array_equal(grad[1], 0.0)


def test_loss_without_consistency_is_the_geodesic_sum(phantom, static_stacks):
    rng = np.random.default_rng(1)
    true = [s.true_transforms for s in static_stacks]
    est = [[perturbed(T, rng) for T in ts] for ts in true]
    cfg = LossConfig(**{"lambda": 0.0})

    breakdown = loss_total(true, est, static_stacks, phantom, cfg)
    expected = sum(
        geodesic_slice_loss(ts[i], es[i], cfg)
        for stack, ts, es in zip(static_stacks, true, est)
        for i in np.flatnonzero(stack.brain_mask)
    )
    assert breakdown.consistency == 0.0
    assert breakdown.total == pytest.approx(expected)
    assert [g.shape for g in breakdown.grads] == [(s.n_slices, 6) for s in static_stacks]


def test_consistency_term(phantom, static_stacks):
    est = [s.true_transforms for s in static_stacks]
    value, grads = consistency_term(static_stacks, est, phantom, 6.0, weight=0.0)
    assert value == 0.0
    assert all(np.all(g == 0.0) for g in grads)

    value, grads = consistency_term(static_stacks, est, phantom, 6.0, weight=0.5)
    assert value > 0.0
    assert all(np.all(np.isfinite(g)) for g in grads)
    assert any(np.any(g != 0.0) for g in grads)


def test_constant_slices_give_no_consistency_gradient(phantom, static_stacks):
    # Ω is 1 wherever slices land whatever the poses, so the loss is flat in them
    rng = np.random.default_rng(2)
    stacks = [s.replace(slices=np.ones_like(s.slices)) for s in static_stacks]
    est = [[perturbed(T, rng, 0.05) for T in s.true_transforms] for s in stacks]

    value, grads = consistency_term(stacks, est, phantom, 6.0, weight=1.0)
    assert value > 0.0
    for g in grads:
        np.testing.assert_allclose(g, 0.0, atol=1e-10)


def splat_consistency(stack, transforms, V, sigma_mm: float) -> float:
    """‖Ω − V‖ with every pixel splatted as a continuous Gaussian."""
    axes = [o + s * np.arange(n) for o, s, n in zip(V.grid.origin, V.grid.spacing, V.dims)]
    num = np.zeros(V.dims)
    den = np.zeros(V.dims)
    for i, T in enumerate(transforms):
        p = apply_to_point(T, stack.pixel_points(i).reshape(-1, 3))
        g = [np.exp(-0.5 * ((ax[:, None] - p[:, k]) / sigma_mm) ** 2) for k, ax in enumerate(axes)]
        num += np.einsum("ap,bp,cp,p->abc", *g, stack.slices[i].reshape(-1), optimize=True)
        den += np.einsum("ap,bp,cp->abc", *g, optimize=True)
    return float(np.linalg.norm(num / den - V.data))


def test_consistency_gradient_matches_a_continuous_splat(phantom, static_stacks):
    # Axial pixels sit on voxel centres at rest, so nearest-voxel deposits are exact
    stack = static_stacks[0]
    transforms = list(stack.true_transforms)
    sigma_mm = 24.0
    cfg = SdaConfig(truncate=8.0)

    value, (grad,) = consistency_term([stack], [transforms], phantom, sigma_mm, sda_cfg=cfg)
    assert value == pytest.approx(splat_consistency(stack, transforms, phantom, sigma_mm), rel=1e-6)

    eps = 1e-4
    expected = np.zeros_like(grad)
    for i, T in enumerate(transforms):
        for k in range(6):
            step = np.zeros(6)
            step[k] = eps
            hi = [*transforms[:i], T.with_params(T.params + step), *transforms[i + 1 :]]
            lo = [*transforms[:i], T.with_params(T.params - step), *transforms[i + 1 :]]
            expected[i, k] = (
                splat_consistency(stack, hi, phantom, sigma_mm)
                - splat_consistency(stack, lo, phantom, sigma_mm)
            ) / (2 * eps)

    cosine = np.sum(grad * expected) / (np.linalg.norm(grad) * np.linalg.norm(expected))
    assert cosine > 0.95
    assert np.linalg.norm(grad - expected) < 0.2 * np.linalg.norm(expected)


def test_backprop_motion_reaches_predictions():
    pred = parameter(np.zeros((2, 6)))
    grad = np.arange(12.0).reshape(2, 6)
    backprop_motion([pred], [grad])
    np.testing.assert_allclose(pred.grad, grad)


@pytest.fixture(scope="module")
def checkpoint() -> Checkpoint:
    params = EstimatorParams.initialize(small_estimator(), seed=5)
    params.norm_states["cnn2d.0"].running_mean += 0.25
    return Checkpoint(params, {"rms.fusion.W_s": np.full((4, 4), 0.5)}, {"epoch": 3, "lr": 1e-4})


def test_checkpoint_round_trip(checkpoint, tmp_path):
    path = tmp_path / "nested" / "checkpoint.bin"
    save_checkpoint(path, checkpoint)
    loaded = load_checkpoint(path)

    assert loaded.params.config == checkpoint.params.config
    assert loaded.params.weights.keys() == checkpoint.params.weights.keys()
    for name, array in checkpoint.params.weights.items():
        np.testing.assert_array_equal(loaded.params.weights[name], array)
    for name, array in checkpoint.params.buffers().items():
        np.testing.assert_array_equal(loaded.params.buffers()[name], array)
    np.testing.assert_array_equal(loaded.extra["rms.fusion.W_s"], 0.5)
    assert loaded.state == checkpoint.state


def test_checkpoint_errors(checkpoint, tmp_path):
    data = dump_checkpoint(checkpoint)
    with pytest.raises(CheckpointError):
        parse_checkpoint(data[:4])
    with pytest.raises(CheckpointError):
        parse_checkpoint(data[:20])
    with pytest.raises(CheckpointError):
        parse_checkpoint(data[:-8])

    (length,) = np.frombuffer(data[:8], dtype="<u8")
    manifest = json.loads(data[8 : 8 + int(length)])
    manifest["version"] = 2
    header = json.dumps(manifest).encode()
    with pytest.raises(CheckpointError, match="version"):
        parse_checkpoint(len(header).to_bytes(8, "little") + header + data[8 + int(length) :])

    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.bin")


def test_rmsprop_step():
    optimizer = RmsProp(decay=0.9, epsilon=0.0)
    weights = {"w": np.array([1.0])}
    optimizer.step(weights, {"w": np.array([2.0])}, lr=0.1)
    assert weights["w"][0] == pytest.approx(1.0 - 0.1 * 2.0 / math.sqrt(0.4))
    assert optimizer.cache["w"][0] == pytest.approx(0.4)


def test_plateau_decay_and_stage_switch():
    cfg = small_train_config(patience_epochs=2, lr_initial=1e-4, loss_switch_lr=6e-5)
    state = TrainState(lr=cfg.lr_initial)

    _update_schedule(state, 1.0, cfg)
    assert (state.best, state.wait, state.lr) == (1.0, 0, 1e-4)
    _update_schedule(state, 1.0, cfg)
    assert (state.wait, state.lr, state.stage) == (1, 1e-4, 1)
    _update_schedule(state, 2.0, cfg)
    assert state.lr == pytest.approx(5e-5)
    assert (state.wait, state.stage) == (0, 2)
    _update_schedule(state, 0.5, cfg)
    assert (state.best, state.wait) == (0.5, 0)


def test_history_csv():
    history = [
        EpochRecord(epoch=0, stage=1, lr=1e-4, train_loss=None, validation_loss=0.5),
        EpochRecord(epoch=1, stage=2, lr=5e-5, train_loss=0.25, validation_loss=0.375),
    ]
    lines = history_to_csv(history).splitlines()
    assert lines[0] == ",".join(HISTORY_COLUMNS)
    assert lines[1] == "0,1,0.0001,,0.5"
    assert lines[2] == "1,2,5e-05,0.25,0.375"
    assert TrainState(lr=1e-4, history=history).switch_epoch == 1


def test_train_config_checks_slice_shape():
    from conftest import small_acquisition

    with pytest.raises(ValidationError):
        small_train_config(acquisition=small_acquisition(in_plane_shape=(8, 8)))


def test_training_samples_are_reproducible():
    cfg = small_train_config()
    a = make_sample(cfg, "train", 1, 0)
    b = make_sample(cfg, "train", 1, 0)
    assert len(a.stacks) == 3
    for sa, sb in zip(a.stacks, b.stacks):
        np.testing.assert_array_equal(sa.slices, sb.slices)
    assert a.reference.grid == cfg.estimator.volume_grid(a.volume.grid.center)
    np.testing.assert_array_equal(a.reference.data, b.reference.data)


def test_zero_learning_rate_keeps_weights():
    cfg = small_train_config(lr_initial=0.0)
    result = train_toy(cfg)
    initial = EstimatorParams.initialize(cfg.estimator, cfg.seed)
    for name, array in initial.weights.items():
        np.testing.assert_array_equal(result.params.weights[name], array)

    assert [r.epoch for r in result.history] == [0, 1]
    assert result.history[0].train_loss is None
    assert math.isfinite(result.history[1].train_loss)


def test_training_is_deterministic():
    cfg = small_train_config(lr_initial=1e-3)
    records = []
    a = train_toy(cfg, on_epoch=records.append)
    b = train_toy(cfg)

    assert a.history == b.history
    assert records == a.history[1:]
    for name in a.params.weights:
        np.testing.assert_array_equal(a.params.weights[name], b.params.weights[name])

    initial = EstimatorParams.initialize(cfg.estimator, cfg.seed)
    assert any(not np.array_equal(a.params.weights[k], initial.weights[k]) for k in initial.weights)


def test_resumed_training_matches_an_uninterrupted_run(tmp_path):
    path = tmp_path / "checkpoint.bin"
    short = small_train_config(lr_initial=1e-3, n_epochs=1)
    full = small_train_config(lr_initial=1e-3, n_epochs=2)

    straight = train_toy(full)
    train_toy(short, checkpoint_path=path)
    resumed = resume_training(path, full)

    assert resumed.state.epoch == 2
    assert resumed.history == straight.history
    for name in straight.params.weights:
        np.testing.assert_array_equal(resumed.params.weights[name], straight.params.weights[name])
    assert load_checkpoint(path).state["epoch"] == 2


@pytest.mark.slow
def test_training_lowers_validation_loss():
    cfg = small_train_config(lr_initial=1e-3, n_epochs=6, sets_per_epoch=4, n_recurrences=2)
    result = train_toy(cfg)
    initial = result.history[0].validation_loss
    assert min(r.validation_loss for r in result.history[1:]) < initial


def best_validation_loss(**update) -> float:
    values = dict(lr_initial=1e-3, n_epochs=6, sets_per_epoch=4, n_recurrences=2)
    result = train_toy(small_train_config(**(values | update)))
    return min(r.validation_loss for r in result.history)


@pytest.mark.slow
def test_attention_fusion_is_no_worse_than_slices_alone():
    with_volume = best_validation_loss()
    slices_only = best_validation_loss(estimator=small_estimator(fusion="none"))
    assert with_volume <= slices_only


@pytest.mark.slow
def test_recurrences_are_no_worse_than_a_single_pass():
    assert best_validation_loss(n_recurrences=2) <= best_validation_loss(n_recurrences=1)


def mean_brain_geodesic(stacks, transforms) -> float:
    errors = [
        motion_errors(s.true_transforms, ts, s.brain_mask).mean_geodesic_deg
        for s, ts in zip(stacks, transforms)
    ]
    return float(np.mean(errors))


@pytest.mark.slow
def test_learned_coarse_pass_rescues_large_offsets():
    cfg = small_train_config(lr_initial=1e-3, n_epochs=8, sets_per_epoch=4, n_recurrences=2)
    params = train_toy(cfg).params
    # Mean offsets of up to 45 degrees exceed the slice search box
    sample = make_sample(cfg, "held-out", 0)
    grid = cfg.estimator.volume_grid(sample.volume.grid.center)

    def final_error(coarse: str) -> float:
        pipeline = PipelineConfig(
            coarse=coarse,
            n_outer=2,
            n_recurrences=cfg.n_recurrences,
            refresh_sigma_mm=cfg.sda.sigma_first_mm,
            sda=cfg.sda,
        )
        result = run_coarse_to_fine(sample.stacks, params, pipeline, grid=grid)
        return mean_brain_geodesic(sample.stacks, result.transforms)

    assert final_error("affirm") < final_error("none")
