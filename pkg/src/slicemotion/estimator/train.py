"""Toy two-stage training on simulated phantom stacks.

Stage 1 minimizes the mean squared error of the transform parameters. Once
plateau decay pushes the learning rate below ``loss_switch_lr``, stage 2
minimizes the geodesic loss plus the reconstruction consistency term.
Every sample, dropout mask and initial weight comes from a labelled
substream of ``TrainConfig.seed``, so a run (or a resumed run) is
reproducible bit for bit.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Self, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from slicemotion.acquisition import AcquisitionConfig, Orientation, SliceStack, acquire_stack
from slicemotion.geometry import LossConfig, RigidTransform, geodesic_slice_loss, rotation_angle
from slicemotion.motionsim import TrajectoryConfig, simulate_trajectory
from slicemotion.rng import substream
from slicemotion.sda import SdaConfig, sda_reconstruct
from slicemotion.volume import Grid, PhantomSpec, Volume3D, make_phantom

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .errors import TrainingDivergedError
from .loss import backprop_motion, loss_total, parameter_mse
from .model import EstimatorConfig, EstimatorParams, affirm_forward

log = logging.getLogger(__name__)

SCALE_AUGMENTATION = tuple(float(s) for s in np.linspace(0.875, 1.125, 10))
RMS_CACHE_PREFIX = "rms."


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_recurrences: int = Field(default=4, ge=1)
    lr_initial: float = Field(default=1e-4, ge=0)
    lr_decay_factor: float = Field(default=2.0, gt=1)
    patience_epochs: int = Field(default=4, ge=1)
    loss_switch_lr: float = Field(default=1e-5, gt=0)
    sets_per_epoch: int = Field(default=16, ge=1)
    validation_sets: int = Field(default=4, ge=1)
    n_epochs: int = Field(default=50, ge=0)
    loss: LossConfig = LossConfig()
    scale_augmentation: tuple[float, ...] = Field(default=SCALE_AUGMENTATION, min_length=1)
    rms_decay: float = Field(default=0.9, gt=0, lt=1)
    rms_epsilon: float = Field(default=1e-8, gt=0)
    seed: int = 0

    estimator: EstimatorConfig = EstimatorConfig()
    acquisition: AcquisitionConfig = AcquisitionConfig()
    trajectory: TrajectoryConfig = TrajectoryConfig()
    phantom: PhantomSpec = PhantomSpec(dims=(48, 48, 48), spacing_mm=2.4)
    sda: SdaConfig = SdaConfig()

    @model_validator(mode="after")
    def _check_shapes(self) -> Self:
        size = self.estimator.image_size
        if tuple(self.acquisition.in_plane_shape) != (size, size):
            raise ValueError(
                f"Slices of shape {self.acquisition.in_plane_shape} do not match "
                f"the estimator image size {size}"
            )
        return self


@dataclass
class TrainingSample:
    stacks: list[SliceStack]
    volume: Volume3D
    """The motion-free phantom the stacks were acquired from."""
    reference: Volume3D
    """Initial reference: SDA of the least-moved stack."""

    @property
    def true_transforms(self) -> list[list[RigidTransform]]:
        return [s.true_transforms for s in self.stacks]


def mean_motion(stack: SliceStack) -> float:
    return float(np.mean([rotation_angle(T.rotation) for T in stack.true_transforms]))


def initial_reference(
    stacks: Sequence[SliceStack],
    grid: Grid,
    sda_cfg: SdaConfig = SdaConfig(),
) -> Volume3D:
    """Single-stack SDA of the stack with the least true rotation."""
    best = min(stacks, key=mean_motion)
    return sda_reconstruct([best], None, sda_cfg.sigma_first_mm, grid, cfg=sda_cfg)


def make_sample(cfg: TrainConfig, *labels: int | str) -> TrainingSample:
    """Simulate one augmented phantom and its three moving stacks."""
    rng = substream(cfg.seed, "sample", *labels)
    scale = float(rng.choice(cfg.scale_augmentation))
    phantom_seed = int(rng.integers(2**31))
    phantom = make_phantom(
        cfg.phantom.model_copy(update={"scale": scale, "feature_seed": phantom_seed})
    )

    trajectory = cfg.trajectory.model_copy(update={"seed": cfg.seed})
    acquisition = cfg.acquisition.model_copy(update={"seed": phantom_seed})
    stacks = []
    for orientation in Orientation:
        traj = simulate_trajectory(trajectory, acquisition.n_slices, *labels, orientation.value)
        stacks.append(acquire_stack(phantom, traj, orientation, acquisition))

    grid = cfg.estimator.volume_grid(phantom.grid.center)
    return TrainingSample(stacks, phantom, initial_reference(stacks, grid, cfg.sda))


def validation_samples(cfg: TrainConfig) -> list[TrainingSample]:
    return [make_sample(cfg, "validation", i) for i in range(cfg.validation_sets)]


def evaluate_estimator(
    params: EstimatorParams,
    samples: Sequence[TrainingSample],
    n_rec: int,
    loss_cfg: LossConfig = LossConfig(),
    sda_cfg: SdaConfig = SdaConfig(),
) -> float:
    """Mean geodesic slice loss over the brain slices of every sample."""
    total = 0.0
    count = 0
    for sample in samples:
        out = affirm_forward(sample.stacks, sample.reference, params, n_rec, sda_cfg=sda_cfg)
        for stack, est in zip(sample.stacks, out.transforms):
            for i in np.flatnonzero(stack.brain_mask):
                total += geodesic_slice_loss(stack.true_transforms[i], est[i], loss_cfg)
                count += 1
    return total / max(count, 1)


class EpochRecord(BaseModel):
    epoch: int
    stage: int
    lr: float
    train_loss: float | None
    validation_loss: float


class TrainState(BaseModel):
    epoch: int = 0
    lr: float
    stage: int = 1
    best: float | None = None
    wait: int = 0
    history: list[EpochRecord] = Field(default_factory=list)

    @property
    def switch_epoch(self) -> int | None:
        for record in self.history:
            if record.stage == 2:
                return record.epoch
        return None


HISTORY_COLUMNS = ("epoch", "stage", "lr", "train_loss", "validation_loss")


def history_to_csv(history: Sequence[EpochRecord]) -> str:
    f = io.StringIO()
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for r in history:
        train = "" if r.train_loss is None else f"{r.train_loss:.9g}"
        writer.writerow([r.epoch, r.stage, f"{r.lr:.9g}", train, f"{r.validation_loss:.9g}"])
    return f.getvalue()


def write_history_csv(history: Sequence[EpochRecord], path: Path) -> None:
    Path(path).write_text(history_to_csv(history), encoding="utf-8")


class RmsProp:
    """RMS-scaled gradient steps: w -= lr·g / (√E[g²] + ε)."""

    def __init__(self, decay: float = 0.9, epsilon: float = 1e-8) -> None:
        self.decay = decay
        self.epsilon = epsilon
        self.cache: dict[str, np.ndarray] = {}

    def step(self, weights: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        for name, g in grads.items():
            cache = self.cache.get(name)
            if cache is None:
                cache = np.zeros_like(g)
            cache = self.decay * cache + (1.0 - self.decay) * g * g
            self.cache[name] = cache
            weights[name] = weights[name] - lr * g / (np.sqrt(cache) + self.epsilon)


@dataclass
class StepResult:
    loss: float
    grads: dict[str, np.ndarray]


def training_step(
    params: EstimatorParams,
    sample: TrainingSample,
    cfg: TrainConfig,
    stage: int,
    rng: np.random.Generator,
) -> StepResult:
    """Forward and backward pass for one sample (batch size 1)."""
    out = affirm_forward(
        sample.stacks,
        sample.reference,
        params,
        cfg.n_recurrences,
        training=True,
        rng=rng,
        sda_cfg=cfg.sda,
    )
    true = sample.true_transforms

    if stage == 1:
        loss = 0.0
        grads = []
        for stack, t, e in zip(sample.stacks, true, out.transforms):
            value, grad = parameter_mse(t, e, stack.brain_mask)
            loss += value / len(sample.stacks)
            grads.append(grad / len(sample.stacks))
    else:
        breakdown = loss_total(
            true,
            out.transforms,
            sample.stacks,
            sample.volume,
            cfg.loss,
            sigma_mm=out.sigmas[-1],
            sda_cfg=cfg.sda,
            grid=out.volumes[-1].grid,
        )
        loss, grads = breakdown.total, breakdown.grads

    if not math.isfinite(loss):
        return StepResult(loss, {})

    backprop_motion(out.predictions, grads)
    return StepResult(loss, out.network.gradients())


@dataclass
class TrainResult:
    params: EstimatorParams
    state: TrainState

    @property
    def history(self) -> list[EpochRecord]:
        return self.state.history


def train_toy(
    cfg: TrainConfig = TrainConfig(),
    *,
    resume: Checkpoint | None = None,
    checkpoint_path: Path | None = None,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> TrainResult:
    """Train from scratch or from a checkpoint written by a previous call.

    When checkpoint_path is given, a checkpoint is written after every epoch
    so that an interrupted run can continue with identical results.

    """
    optimizer = RmsProp(cfg.rms_decay, cfg.rms_epsilon)
    if resume is not None:
        params = resume.params
        state = TrainState.model_validate(resume.state)
        optimizer.cache = {
            k.removeprefix(RMS_CACHE_PREFIX): v
            for k, v in resume.extra.items()
            if k.startswith(RMS_CACHE_PREFIX)
        }
        log.info("Resuming training after epoch %d", state.epoch)
    else:
        params = EstimatorParams.initialize(cfg.estimator, cfg.seed)
        state = TrainState(lr=cfg.lr_initial)
        log.info("Initialized estimator with %d parameters", params.n_parameters)

    def save() -> None:
        if checkpoint_path is None:
            return
        extra = {RMS_CACHE_PREFIX + k: v for k, v in optimizer.cache.items()}
        save_checkpoint(
            checkpoint_path, Checkpoint(params, extra, state.model_dump(mode="json"))
        )

    if state.epoch >= cfg.n_epochs:
        save()
        return TrainResult(params, state)

    validation = validation_samples(cfg)

    def validate() -> float:
        return evaluate_estimator(params, validation, cfg.n_recurrences, cfg.loss, cfg.sda)

    if not state.history:
        initial = validate()
        state.history.append(
            EpochRecord(epoch=0, stage=state.stage, lr=state.lr, train_loss=None, validation_loss=initial)
        )
        state.best = initial
        log.info("Initial validation loss %.4f", initial)

    for epoch in range(state.epoch + 1, cfg.n_epochs + 1):
        losses = []
        for step in range(cfg.sets_per_epoch):
            sample = make_sample(cfg, "train", epoch, step)
            rng = substream(cfg.seed, "dropout", epoch, step)
            result = training_step(params, sample, cfg, state.stage, rng)
            if not math.isfinite(result.loss):
                raise TrainingDivergedError(
                    f"Loss became {result.loss} at epoch {epoch}, step {step} "
                    f"(stage {state.stage}, lr {state.lr:.3g})"
                )
            optimizer.step(params.weights, result.grads, state.lr)
            losses.append(result.loss)
            log.debug("Epoch %d step %d loss %.5f", epoch, step, result.loss)

        if not params.all_finite():
            raise TrainingDivergedError(f"Weights became non-finite at epoch {epoch}")

        val = validate()
        record = EpochRecord(
            epoch=epoch,
            stage=state.stage,
            lr=state.lr,
            train_loss=float(np.mean(losses)),
            validation_loss=val,
        )
        state.history.append(record)
        _update_schedule(state, val, cfg)
        state.epoch = epoch

        log.info(
            "Epoch %d/%d: train %.4f, validation %.4f, lr %.3g, stage %d",
            epoch,
            cfg.n_epochs,
            record.train_loss,
            val,
            record.lr,
            record.stage,
        )
        if on_epoch is not None:
            on_epoch(record)
        save()

    return TrainResult(params, state)


def _update_schedule(state: TrainState, validation_loss: float, cfg: TrainConfig) -> None:
    """Plateau decay of the learning rate and the switch to the second stage."""
    if state.best is None or validation_loss < state.best:
        state.best = validation_loss
        state.wait = 0
        return

    state.wait += 1
    if state.wait < cfg.patience_epochs:
        return

    state.lr /= cfg.lr_decay_factor
    state.wait = 0
    log.info("No improvement for %d epochs, learning rate now %.3g", cfg.patience_epochs, state.lr)
    if state.stage == 1 and state.lr < cfg.loss_switch_lr:
        state.stage = 2
        log.info("Switching to the geodesic and consistency loss")


def resume_training(path: Path, cfg: TrainConfig, **kwargs) -> TrainResult:
    return train_toy(cfg, resume=load_checkpoint(path), checkpoint_path=path, **kwargs)
