from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from slicemotion.acquisition import Orientation, SliceStack
from slicemotion.geometry import RigidTransform
from slicemotion.rng import substream
from slicemotion.sda import SdaConfig, sda_reconstruct, sigma_schedule
from slicemotion.volume import Grid, Volume3D, resample

from .errors import MissingOrientationError, ShapeMismatchError
from .fusion import FusionParams, affinity_fusion, late_fusion
from .gru import GruParams, bigru_forward
from .heads import ROTATION_SCALE, TRANSLATION_SCALE, HeadParams, predict_motion
from .layers import BatchNormState, avgpool2, batchnorm, conv, he_normal
from .tensor import Tensor, concat, getitem, parameter, relu, reshape, transpose

log = logging.getLogger(__name__)

FusionMode = Literal["affinity", "late", "none"]


class EstimatorConfig(BaseModel):
    """Sizes of the toy network; defaults train in minutes on a CPU."""

    model_config = ConfigDict(frozen=True)

    image_size: int = Field(default=48, ge=8)
    channels: tuple[int, ...] = Field(default=(8, 16, 16), min_length=1)
    kernel_size: int = Field(default=3, ge=1)
    hidden_size: int = Field(default=32, ge=1)
    embedding: int = Field(default=16, ge=1)
    head_hidden: int = Field(default=32, ge=1)
    dropout_rate: float = Field(default=0.2, ge=0, lt=1)
    fusion: FusionMode = "affinity"
    standard_gru: bool = False
    volume_size: int = Field(default=48, ge=8)
    volume_spacing_mm: float = Field(default=2.4, gt=0)

    @property
    def feature_size(self) -> int:
        return self.image_size // 2 ** len(self.channels)

    @property
    def volume_feature_size(self) -> int:
        return self.volume_size // 2 ** len(self.channels)

    @property
    def slice_feature_size(self) -> int:
        return self.channels[-1] * self.feature_size**2

    @property
    def head_input_size(self) -> int:
        size = 2 * self.hidden_size + len(Orientation)
        if self.fusion != "none":
            size += self.embedding
        return size

    def volume_grid(self, center_mm=(0.0, 0.0, 0.0)) -> Grid:
        return Grid.centered((self.volume_size,) * 3, self.volume_spacing_mm, center_mm)


def _cnn_arrays(
    rng: np.random.Generator,
    prefix: str,
    channels: Sequence[int],
    kernel_size: int,
    n_spatial: int,
) -> dict[str, np.ndarray]:
    arrays = {}
    c_in = 1
    for i, c_out in enumerate(channels):
        shape = (c_out, c_in) + (kernel_size,) * n_spatial
        arrays[f"{prefix}.{i}.W"] = he_normal(rng, shape, c_in * kernel_size**n_spatial)
        arrays[f"{prefix}.{i}.gamma"] = np.ones(c_out)
        arrays[f"{prefix}.{i}.beta"] = np.zeros(c_out)
        c_in = c_out
    return arrays


@dataclass
class EstimatorParams:
    """Every learnable weight of the estimator plus normalization statistics."""

    config: EstimatorConfig
    weights: dict[str, np.ndarray]
    norm_states: dict[str, BatchNormState] = field(default_factory=dict)

    @classmethod
    def initialize(cls, config: EstimatorConfig = EstimatorConfig(), seed: int = 0) -> EstimatorParams:
        rng = substream(seed, "estimator-init")
        c = config
        weights: dict[str, np.ndarray] = {}
        weights |= _cnn_arrays(rng, "cnn2d", c.channels, c.kernel_size, 2)
        weights |= _cnn_arrays(rng, "cnn3d", c.channels, c.kernel_size, 3)

        for direction in ("gru_fwd", "gru_bwd"):
            arrays = GruParams.initial_arrays(rng, c.slice_feature_size, c.hidden_size)
            weights |= {f"{direction}.{k}": v for k, v in arrays.items()}

        fusion = FusionParams.initial_arrays(rng, c.channels[-1], c.embedding)
        weights |= {f"fusion.{k}": v for k, v in fusion.items()}

        for head in ("head_rot", "head_trans"):
            arrays = HeadParams.initial_arrays(rng, c.head_input_size, c.head_hidden)
            weights |= {f"{head}.{k}": v for k, v in arrays.items()}

        norm_states = {
            f"{prefix}.{i}": BatchNormState.fresh(ch)
            for prefix in ("cnn2d", "cnn3d")
            for i, ch in enumerate(c.channels)
        }
        return cls(config, weights, norm_states)

    @property
    def n_parameters(self) -> int:
        return sum(a.size for a in self.weights.values())

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.weights.values())

    def buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for name, state in self.norm_states.items():
            out[f"{name}.running_mean"] = state.running_mean
            out[f"{name}.running_var"] = state.running_var
        return out

    def load_buffers(self, buffers: dict[str, np.ndarray]) -> None:
        for name, state in self.norm_states.items():
            state.running_mean = np.array(buffers[f"{name}.running_mean"], dtype=float)
            state.running_var = np.array(buffers[f"{name}.running_var"], dtype=float)

    def copy(self) -> EstimatorParams:
        states = {
            k: BatchNormState(s.running_mean.copy(), s.running_var.copy(), s.momentum)
            for k, s in self.norm_states.items()
        }
        return EstimatorParams(self.config, {k: v.copy() for k, v in self.weights.items()}, states)


class EstimatorNetwork:
    """One differentiable pass over EstimatorParams.

    Wraps each weight in a parameter Tensor so that gradients can be read
    back by name after ``backward()``.

    """

    def __init__(
        self,
        params: EstimatorParams,
        *,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> None:
        self.params = params
        self.config = params.config
        self.training = training
        self.rng = rng
        self.tensors = {name: parameter(array, name) for name, array in params.weights.items()}

        self.gru_fwd = GruParams.from_mapping(self.tensors, "gru_fwd.")
        self.gru_bwd = GruParams.from_mapping(self.tensors, "gru_bwd.")
        self.fusion = FusionParams(
            self.tensors["fusion.W_s"], self.tensors["fusion.W_v"], self.tensors["fusion.W_g"]
        )
        rate = self.config.dropout_rate
        self.head_rot = HeadParams(
            *(self.tensors[f"head_rot.{k}"] for k in ("W1", "b1", "W2", "b2")),
            scale=ROTATION_SCALE,
            dropout_rate=rate,
        )
        self.head_trans = HeadParams(
            *(self.tensors[f"head_trans.{k}"] for k in ("W1", "b1", "W2", "b2")),
            scale=TRANSLATION_SCALE,
            dropout_rate=rate,
        )

    def gradients(self) -> dict[str, np.ndarray]:
        return {
            name: t.grad if t.grad is not None else np.zeros(t.shape)
            for name, t in self.tensors.items()
        }

    def cnn(self, x: Tensor, prefix: str) -> Tensor:
        for i in range(len(self.config.channels)):
            x = conv(x, self.tensors[f"{prefix}.{i}.W"])
            x = batchnorm(
                x,
                self.tensors[f"{prefix}.{i}.gamma"],
                self.tensors[f"{prefix}.{i}.beta"],
                self.params.norm_states[f"{prefix}.{i}"],
                training=self.training,
            )
            x = avgpool2(relu(x))
        return x

    def volume_features(self, volume: Volume3D) -> Tensor:
        """3D feature map flattened to (K, C) positions × channels."""
        x = Tensor(np.asarray(volume.data, dtype=float)[None, None])
        features = self.cnn(x, "cnn3d")
        c = self.config.channels[-1]
        return transpose(reshape(features, (c, -1)), None)

    def motion_block(self, stack: SliceStack, volume_features: Tensor) -> Tensor:
        """Per-slice motion parameters (N, 6) of one stack, in slice index order."""
        size = self.config.image_size
        if stack.shape != (size, size):
            raise ShapeMismatchError(f"Expected {size}×{size} slices, got {stack.shape}")

        order = stack.acquisition_order
        n = stack.n_slices
        images = Tensor(stack.slices[order][:, None])
        features = self.cnn(images, "cnn2d")
        c = self.config.channels[-1]

        flat = reshape(features, (n, -1))
        sequence = [getitem(flat, slice(t, t + 1)) for t in range(n)]
        hidden = concat(
            bigru_forward(sequence, self.gru_fwd, self.gru_bwd, standard=self.config.standard_gru),
            axis=0,
        )

        parts = [hidden]
        if self.config.fusion == "affinity":
            positions = transpose(reshape(features, (n, c, -1)), (0, 2, 1))
            parts.append(affinity_fusion(positions, volume_features, self.fusion))
        elif self.config.fusion == "late":
            context = late_fusion(volume_features, self.fusion)
            parts.append(getitem(context, np.zeros(n, dtype=int)))

        onehot = np.zeros((n, len(Orientation)))
        onehot[:, stack.orientation.index] = 1.0
        parts.append(Tensor(onehot))

        motion = predict_motion(
            concat(parts, axis=-1),
            self.head_rot,
            self.head_trans,
            training=self.training,
            rng=self.rng,
        )
        # Back from acquisition order to slice index order
        return getitem(motion, np.argsort(order))


def check_orientations(stacks: Sequence[SliceStack]) -> None:
    present = {s.orientation for s in stacks}
    missing = [o.value for o in Orientation if o not in present]
    if missing:
        raise MissingOrientationError(f"Missing stacks for orientation(s): {', '.join(missing)}")


def params_to_transforms(motion: np.ndarray, center) -> list[RigidTransform]:
    return [RigidTransform(theta=row[:3], d=row[3:], center=center) for row in motion]


@dataclass
class AffirmOutput:
    transforms: list[list[RigidTransform]]
    """Final per-slice estimates, one list per stack."""
    predictions: list[Tensor]
    """Differentiable (N, 6) outputs of the last recurrence, one per stack."""
    volumes: list[Volume3D]
    """The reconstruction after each recurrence."""
    sigmas: list[float]
    network: EstimatorNetwork


def affirm_forward(
    stacks: Sequence[SliceStack],
    reference: Volume3D,
    params: EstimatorParams,
    n_rec: int = 4,
    *,
    training: bool = False,
    rng: np.random.Generator | None = None,
    sda_cfg: SdaConfig = SdaConfig(),
) -> AffirmOutput:
    """Alternate motion estimation and SDA reconstruction n_rec times.

    Weights are shared across recurrences. Each recurrence estimates every
    slice's pose against the current reference, then rebuilds the reference
    from all stacks with the kernel width of that recurrence. The rebuilt
    reference is not differentiated through.

    """
    check_orientations(stacks)
    if n_rec < 1:
        raise ShapeMismatchError("n_rec must be at least 1")

    network = EstimatorNetwork(params, training=training, rng=rng)
    grid = params.config.volume_grid(stacks[0].center_mm)
    if reference.grid != grid:
        reference = resample(reference, RigidTransform.identity(grid.center), grid)

    schedule = sda_cfg.model_copy(update={"n_iterations": n_rec})
    volumes: list[Volume3D] = []
    sigmas: list[float] = []
    predictions: list[Tensor] = []
    transforms: list[list[RigidTransform]] = []

    for k in range(1, n_rec + 1):
        features = network.volume_features(reference)
        predictions = [network.motion_block(stack, features) for stack in stacks]
        transforms = [
            params_to_transforms(p.data, stack.center_mm) for p, stack in zip(predictions, stacks)
        ]

        sigma = sigma_schedule(k, schedule)
        reference = sda_reconstruct(stacks, transforms, sigma, grid, cfg=schedule)
        volumes.append(reference)
        sigmas.append(sigma)
        log.debug("Recurrence %d/%d rebuilt the reference with sigma %.3f mm", k, n_rec, sigma)

    return AffirmOutput(transforms, predictions, volumes, sigmas, network)
