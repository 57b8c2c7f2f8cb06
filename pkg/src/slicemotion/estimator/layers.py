from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EstimatorError, ShapeMismatchError
from .tensor import Tensor, _make, as_tensor


def conv(x, W, b=None) -> Tensor:
    """Same-padded convolution (cross-correlation) over 2 or 3 spatial axes.

    x is (B, C_in, *S), W is (C_out, C_in, *K) with odd K, b is (C_out,).
    Implemented as a sum over kernel offsets of channel contractions.

    """
    x, W = as_tensor(x), as_tensor(W)
    spatial = x.shape[2:]
    kernel = W.shape[2:]
    if len(spatial) != len(kernel) or x.shape[1] != W.shape[1]:
        raise ShapeMismatchError(f"Cannot convolve {x.shape} with kernel {W.shape}")
    if any(k % 2 == 0 for k in kernel):
        raise ShapeMismatchError(f"Kernel sizes must be odd, got {kernel}")

    pads = [k // 2 for k in kernel]
    xp = np.pad(x.data, [(0, 0), (0, 0)] + [(p, p) for p in pads])
    lead = (slice(None), slice(None))
    windows = [
        (offset, lead + tuple(slice(o, o + s) for o, s in zip(offset, spatial)))
        for offset in np.ndindex(*kernel)
    ]

    out = np.zeros((x.shape[0], W.shape[0], *spatial))
    for offset, window in windows:
        out += np.einsum("oc,bc...->bo...", W.data[lead + offset], xp[window])

    parents: tuple[Tensor, ...] = (x, W)
    if b is not None:
        b = as_tensor(b)
        out += b.data.reshape((1, -1) + (1,) * len(spatial))
        parents = (x, W, b)

    def backward(g: np.ndarray) -> None:
        gW = np.zeros(W.shape)
        gxp = np.zeros(xp.shape)
        for offset, window in windows:
            gW[lead + offset] = np.einsum("bo...,bc...->oc", g, xp[window])
            gxp[window] += np.einsum("oc,bo...->bc...", W.data[lead + offset], g)
        W.accumulate(gW)
        x.accumulate(gxp[lead + tuple(slice(p, p + s) for p, s in zip(pads, spatial))])
        if b is not None:
            b.accumulate(g.sum(axis=(0, *range(2, g.ndim))))

    return _make(out, parents, backward)


def avgpool2(x) -> Tensor:
    """Non-overlapping 2× average pooling over every spatial axis."""
    x = as_tensor(x)
    spatial = x.shape[2:]
    if any(s % 2 for s in spatial):
        raise ShapeMismatchError(f"Spatial shape {spatial} is not divisible by 2")

    split = x.shape[:2] + tuple(v for s in spatial for v in (s // 2, 2))
    axes = tuple(3 + 2 * i for i in range(len(spatial)))
    out = x.data.reshape(split).mean(axis=axes)
    scale = 2 ** len(spatial)

    def backward(g: np.ndarray) -> None:
        expanded = np.broadcast_to(np.expand_dims(g, axes), split) / scale
        x.accumulate(expanded.reshape(x.shape))

    return _make(out, (x,), backward)


@dataclass
class BatchNormState:
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1

    @classmethod
    def fresh(cls, channels: int) -> BatchNormState:
        return cls(np.zeros(channels), np.ones(channels))


def batchnorm(
    x,
    gamma,
    beta,
    state: BatchNormState,
    *,
    training: bool,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel standardization over batch and spatial axes.

    Training mode normalizes with batch statistics and updates the running
    ones; evaluation mode uses the frozen running statistics.

    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    axes = (0, *range(2, x.ndim))
    bshape = (1, -1) + (1,) * (x.ndim - 2)
    m = x.size / x.shape[1]

    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        state.running_mean = (1 - state.momentum) * state.running_mean + state.momentum * mu
        state.running_var = (1 - state.momentum) * state.running_var + state.momentum * var
    else:
        mu, var = state.running_mean, state.running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(bshape)) * inv_std.reshape(bshape)
    out = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)

    def backward(g: np.ndarray) -> None:
        gamma.accumulate((g * xhat).sum(axis=axes))
        beta.accumulate(g.sum(axis=axes))

        dxhat = g * gamma.data.reshape(bshape)
        if training:
            dx = (
                m * dxhat
                - dxhat.sum(axis=axes, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
            ) * (inv_std.reshape(bshape) / m)
        else:
            dx = dxhat * inv_std.reshape(bshape)
        x.accumulate(dx)

    return _make(out, (x, gamma, beta), backward)


def dropout(x, rate: float, rng: np.random.Generator | None, *, training: bool) -> Tensor:
    """Inverted dropout; the identity outside training."""
    x = as_tensor(x)
    if not training or rate <= 0:
        return x
    if rng is None:
        raise EstimatorError("Dropout in training mode needs a random generator")

    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def backward(g: np.ndarray) -> None:
        x.accumulate(g * mask)

    return _make(x.data * mask, (x,), backward)


def he_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    return rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))
