from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .layers import glorot_uniform
from .tensor import Tensor, as_tensor, linear, matmul, mean, softmax, transpose


@dataclass(frozen=True)
class FusionParams:
    """Embeddings of 2D queries (W_s), 3D keys (W_v) and 3D values (W_g), each (E, C)."""

    W_s: Tensor
    W_v: Tensor
    W_g: Tensor

    def __post_init__(self) -> None:
        if not (self.W_s.shape == self.W_v.shape == self.W_g.shape):
            raise ShapeMismatchError(
                f"Fusion embeddings disagree: {self.W_s.shape}, {self.W_v.shape}, {self.W_g.shape}"
            )

    @property
    def channels(self) -> int:
        return self.W_s.shape[1]

    @property
    def embedding(self) -> int:
        return self.W_s.shape[0]

    @staticmethod
    def initial_arrays(rng: np.random.Generator, channels: int, embedding: int) -> dict[str, np.ndarray]:
        return {name: glorot_uniform(rng, embedding, channels) for name in ("W_s", "W_v", "W_g")}


def affinity_attention(x_s, x_v, p: FusionParams) -> tuple[Tensor, Tensor]:
    """Scaled dot-product attention of slice positions over volume positions.

    x_s is (..., P, C) and x_v is (K, C). Returns the attended values
    (..., P, E) and the attention weights (..., P, K), which sum to 1 over K.

    """
    x_s, x_v = as_tensor(x_s), as_tensor(x_v)
    if x_s.shape[-1] != p.channels or x_v.shape[-1] != p.channels:
        raise ShapeMismatchError(
            f"Fusion expects {p.channels} channels, got {x_s.shape} and {x_v.shape}"
        )

    queries = linear(x_s, p.W_s)
    keys = linear(x_v, p.W_v)
    values = linear(x_v, p.W_g)

    scores = matmul(queries, transpose(keys)) * (1.0 / math.sqrt(p.channels))
    weights = softmax(scores, axis=-1)
    return matmul(weights, values), weights


def affinity_fusion(x_s, x_v, p: FusionParams) -> Tensor:
    """Per-slice context vector: attended values averaged over slice positions."""
    attended, _ = affinity_attention(x_s, x_v, p)
    return mean(attended, axis=-2)


def late_fusion(x_v, p: FusionParams) -> Tensor:
    """Global-average volume features embedded by W_g, shape (1, E)."""
    x_v = as_tensor(x_v)
    return linear(mean(x_v, axis=0, keepdims=True), p.W_g)
