from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .layers import dropout, glorot_uniform
from .tensor import Tensor, concat, linear, mul, relu, tanh

ROTATION_SCALE = math.pi / 2
TRANSLATION_SCALE = 10.0


@dataclass(frozen=True)
class HeadParams:
    """FC → ReLU → dropout → FC → scale·tanh."""

    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    scale: float
    dropout_rate: float = 0.2

    @staticmethod
    def initial_arrays(rng: np.random.Generator, n_in: int, n_hidden: int) -> dict[str, np.ndarray]:
        return {
            "W1": glorot_uniform(rng, n_hidden, n_in),
            "b1": np.zeros(n_hidden),
            "W2": rng.normal(0.0, 0.01, size=(3, n_hidden)),
            "b2": np.zeros(3),
        }


def head_forward(
    h: Tensor,
    p: HeadParams,
    *,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    hidden = relu(linear(h, p.W1, p.b1))
    hidden = dropout(hidden, p.dropout_rate, rng, training=training)
    return mul(tanh(linear(hidden, p.W2, p.b2)), p.scale)


def predict_motion(
    h: Tensor,
    rot: HeadParams,
    trans: HeadParams,
    *,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Six motion parameters per row: angles in (-π/2, π/2), displacements in (-10, 10) mm."""
    return concat(
        [
            head_forward(h, rot, training=training, rng=rng),
            head_forward(h, trans, training=training, rng=rng),
        ],
        axis=-1,
    )
