from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptySequenceError, ShapeMismatchError
from .layers import glorot_uniform
from .tensor import Tensor, as_tensor, concat, linear, mul, sigmoid, sub, tanh


@dataclass(frozen=True)
class GruParams:
    """Weights of one gated recurrent cell.

    Input matrices are (hidden, input), recurrent ones (hidden, hidden).

    """

    W_zx: Tensor
    W_zh: Tensor
    W_rx: Tensor
    W_rh: Tensor
    W_hx: Tensor
    W_hr: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor

    def __post_init__(self) -> None:
        H, n_in = self.W_zx.shape
        expected = {
            "W_zx": (H, n_in),
            "W_rx": (H, n_in),
            "W_hx": (H, n_in),
            "W_zh": (H, H),
            "W_rh": (H, H),
            "W_hr": (H, H),
            "b_z": (H,),
            "b_r": (H,),
            "b_h": (H,),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ShapeMismatchError(f"GRU {name} has shape {actual}, expected {shape}")

    @property
    def hidden_size(self) -> int:
        return self.W_zx.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_zx.shape[1]

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Tensor], prefix: str = "") -> GruParams:
        return cls(**{name: as_tensor(mapping[prefix + name]) for name in cls.names()})

    @staticmethod
    def initial_arrays(
        rng: np.random.Generator,
        input_size: int,
        hidden_size: int,
    ) -> dict[str, np.ndarray]:
        arrays = {}
        for gate in ("z", "r", "h"):
            arrays[f"W_{gate}x"] = glorot_uniform(rng, hidden_size, input_size)
        arrays["W_zh"] = glorot_uniform(rng, hidden_size, hidden_size)
        arrays["W_rh"] = glorot_uniform(rng, hidden_size, hidden_size)
        arrays["W_hr"] = glorot_uniform(rng, hidden_size, hidden_size)
        for gate in ("z", "r", "h"):
            arrays[f"b_{gate}"] = np.zeros(hidden_size)
        return arrays


def gru_cell_forward(x: Tensor, h_prev: Tensor, p: GruParams, *, standard: bool = False) -> Tensor:
    """One GRU step on row vectors x (1, in) and h_prev (1, hidden).

    The default follows the gate placement h = (1 - z)⊙h_prev + z⊙ĥ; with
    standard=True the conventional h = z⊙h_prev + (1 - z)⊙ĥ is used.

    """
    x, h_prev = as_tensor(x), as_tensor(h_prev)
    if x.shape[-1] != p.input_size or h_prev.shape[-1] != p.hidden_size:
        raise ShapeMismatchError(
            f"GRU expects input {p.input_size} and hidden {p.hidden_size}, "
            f"got {x.shape} and {h_prev.shape}"
        )

    z = sigmoid(linear(x, p.W_zx) + linear(h_prev, p.W_zh) + p.b_z)
    r = sigmoid(linear(x, p.W_rx) + linear(h_prev, p.W_rh) + p.b_r)
    candidate = tanh(linear(x, p.W_hx) + linear(mul(r, h_prev), p.W_hr) + p.b_h)

    keep, update = (z, sub(1.0, z)) if standard else (sub(1.0, z), z)
    return mul(keep, h_prev) + mul(update, candidate)


def gru_sequence(seq: Sequence[Tensor], p: GruParams, *, standard: bool = False) -> list[Tensor]:
    h = Tensor(np.zeros((1, p.hidden_size)))
    outputs = []
    for x in seq:
        h = gru_cell_forward(x, h, p, standard=standard)
        outputs.append(h)
    return outputs


def bigru_forward(
    seq: Sequence[Tensor],
    p_fwd: GruParams,
    p_bwd: GruParams,
    *,
    standard: bool = False,
) -> list[Tensor]:
    """Run independent cells forwards and backwards; concatenate per step."""
    if not seq:
        raise EmptySequenceError()

    forward = gru_sequence(seq, p_fwd, standard=standard)
    backward = gru_sequence(seq[::-1], p_bwd, standard=standard)[::-1]
    return [concat([f, b], axis=-1) for f, b in zip(forward, backward)]
