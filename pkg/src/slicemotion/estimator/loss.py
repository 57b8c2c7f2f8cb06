"""Training losses with analytic gradients in transform-parameter space.

Gradients are returned per stack as (N, 6) arrays over (θx, θy, θz, dx, dy, dz)
and pushed into the network with ``backprop_motion``.

The consistency term differentiates through the reconstruction with a
straight-through approximation: nearest-voxel placement is treated as a
continuous deposit, so only the Gaussian blur and the normalization
contribute to the Jacobian. With normalization every pixel moves both the
intensity and the count accumulator, so a pixel of intensity I at p gets
I·∇q_num(p) − ∇q_cnt(p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from slicemotion.acquisition import SliceStack
from slicemotion.geometry import (
    LossConfig,
    RigidTransform,
    apply_to_point,
    euler_jacobian,
    rotation_angle,
)
from slicemotion.sda import SdaConfig, deposit, sda_reconstruct
from slicemotion.volume import Grid, Volume3D, resample, trilinear_sample

from .errors import ShapeMismatchError
from .tensor import Tensor, mul, sum_

SMALL_ANGLE = 1e-8


def geodesic_loss_grad(
    T: RigidTransform,
    T_hat: RigidTransform,
    cfg: LossConfig = LossConfig(),
) -> tuple[float, np.ndarray]:
    """Geodesic slice loss and its gradient with respect to T_hat's parameters.

    At T_hat = T the loss has a square-root kink; its gradient is defined as 0.

    """
    R_hat = T_hat.rotation
    rel = R_hat.T @ T.rotation
    a = rotation_angle(rel)
    delta = T_hat.d - T.d
    value = math.sqrt(2.0 * a * a + cfg.gamma * float(delta @ delta))

    grad = np.zeros(6)
    if value == 0.0:
        return value, grad

    ratio = 1.0 if a < SMALL_ANGLE else a / max(math.sin(a), SMALL_ANGLE)
    J = euler_jacobian(T_hat.theta)
    dtrace = np.einsum("kij,ij->k", J, T.rotation)
    grad[:3] = -ratio * dtrace / value
    grad[3:] = cfg.gamma * delta / value
    return value, grad


def geodesic_term(
    true: Sequence[RigidTransform],
    est: Sequence[RigidTransform],
    mask: np.ndarray,
    cfg: LossConfig = LossConfig(),
) -> tuple[float, np.ndarray]:
    """Sum of geodesic slice losses over masked slices, with (N, 6) gradient."""
    if len(true) != len(est) or len(mask) != len(est):
        raise ShapeMismatchError(
            f"Got {len(true)} true and {len(est)} estimated transforms for {len(mask)} slices"
        )

    total = 0.0
    grad = np.zeros((len(est), 6))
    for i in np.flatnonzero(mask):
        value, grad[i] = geodesic_loss_grad(true[i], est[i], cfg)
        total += value
    return total, grad


def parameter_mse(
    true: Sequence[RigidTransform],
    est: Sequence[RigidTransform],
    mask: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Mean squared error of the six transform parameters over masked slices."""
    mask = np.asarray(mask, dtype=bool)
    diff = np.array([e.params - t.params for t, e in zip(true, est)]).reshape(-1, 6)
    count = max(int(mask.sum()) * 6, 1)
    diff[~mask] = 0.0
    return float(np.sum(diff**2) / count), 2.0 * diff / count


def consistency_term(
    stacks: Sequence[SliceStack],
    est: Sequence[Sequence[RigidTransform]],
    V_true: Volume3D,
    sigma_mm: float,
    *,
    weight: float = 1.0,
    sda_cfg: SdaConfig = SdaConfig(),
) -> tuple[float, list[np.ndarray]]:
    """weight·‖Ω(I, T̂) − V‖₂ and its straight-through gradient per stack."""
    grid = V_true.grid
    omega = sda_reconstruct(stacks, est, sigma_mm, grid, cfg=sda_cfg)
    residual = omega.data - np.asarray(V_true.data, dtype=float)
    norm = float(np.linalg.norm(residual))
    grads = [np.zeros((s.n_slices, 6)) for s in stacks]
    if norm == 0.0 or weight == 0.0:
        return weight * norm, grads

    q_num, q_cnt = _deposit_sensitivity(
        stacks, est, grid, weight * residual / norm, omega.data, sigma_mm, sda_cfg
    )
    gradient_num = _spatial_gradient(q_num, grid)
    gradient_cnt = None if q_cnt is None else _spatial_gradient(q_cnt, grid)

    for stack, transforms, out in zip(stacks, est, grads):
        for i in range(stack.n_slices):
            T = transforms[i]
            p0 = stack.pixel_points(i).reshape(-1, 3)
            p = apply_to_point(T, p0)
            intensity = stack.slices[i].reshape(-1, 1)
            dp = intensity * np.stack([trilinear_sample(g, p) for g in gradient_num], axis=-1)
            if gradient_cnt is not None:
                dp -= np.stack([trilinear_sample(g, p) for g in gradient_cnt], axis=-1)

            J = euler_jacobian(T.theta)
            local = p0 - T.center
            # dp/dθ_k = J_k (p0 - c)
            out[i, :3] = np.einsum("mi,kij,mj->k", dp, J, local)
            out[i, 3:] = dp.sum(axis=0)

    return weight * norm, grads


def _spatial_gradient(field: np.ndarray, grid: Grid) -> list[Volume3D]:
    return [Volume3D(g, grid) for g in np.gradient(field, *grid.spacing, edge_order=2)]


def _deposit_sensitivity(
    stacks: Sequence[SliceStack],
    est: Sequence[Sequence[RigidTransform]],
    grid: Grid,
    upstream: np.ndarray,
    omega: np.ndarray,
    sigma_mm: float,
    cfg: SdaConfig,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Gradients of the loss with respect to the deposited intensity and count fields.

    The count field only matters with normalization; it is None otherwise.
    Ω = blur(n) / blur(c) gives dL/dn = blur(u / D) and dL/dc = -blur(u·Ω / D).

    """
    sigma_vox = sigma_mm / grid.spacing

    def blur(a: np.ndarray) -> np.ndarray:
        return ndimage.gaussian_filter(a, sigma=sigma_vox, truncate=cfg.truncate, mode="constant")

    if not cfg.normalize:
        return blur(upstream), None

    counts = np.zeros(grid.n_voxels)
    for stack, transforms in zip(stacks, est):
        counts += deposit(stack, transforms, grid)[1]
    den = blur(counts.reshape(grid.dims))
    scaled = np.zeros(grid.dims)
    np.divide(upstream, den, out=scaled, where=den > cfg.count_epsilon)
    return blur(scaled), blur(scaled * omega)


@dataclass
class LossBreakdown:
    total: float
    geodesic: float
    consistency: float
    grads: list[np.ndarray]
    """Gradient with respect to each stack's (N, 6) motion parameters."""


def loss_total(
    T_true: Sequence[Sequence[RigidTransform]],
    T_est: Sequence[Sequence[RigidTransform]],
    stacks: Sequence[SliceStack],
    V_true: Volume3D,
    cfg: LossConfig = LossConfig(),
    *,
    sigma_mm: float | None = None,
    sda_cfg: SdaConfig = SdaConfig(),
    grid: Grid | None = None,
) -> LossBreakdown:
    """Geodesic loss over brain slices plus λ times the reconstruction residual.

    sigma_mm defaults to the last kernel width of the SDA schedule. V_true is
    resampled onto grid when one is given.

    """
    if not (len(T_true) == len(T_est) == len(stacks)):
        raise ShapeMismatchError("T_true, T_est and stacks must have the same length")
    if sigma_mm is None:
        sigma_mm = sda_cfg.sigma_last_mm
    if grid is not None and V_true.grid != grid:
        V_true = resample(V_true, RigidTransform.identity(grid.center), grid)

    geodesic = 0.0
    grads = []
    for true, est, stack in zip(T_true, T_est, stacks):
        value, grad = geodesic_term(true, est, stack.brain_mask, cfg)
        geodesic += value
        grads.append(grad)

    consistency = 0.0
    if cfg.lambda_ > 0:
        consistency, extra = consistency_term(
            stacks, T_est, V_true, sigma_mm, weight=cfg.lambda_, sda_cfg=sda_cfg
        )
        grads = [g + e for g, e in zip(grads, extra)]

    return LossBreakdown(geodesic + consistency, geodesic, consistency, grads)


def backprop_motion(predictions: Sequence[Tensor], grads: Sequence[np.ndarray]) -> None:
    """Push parameter-space gradients through the network outputs."""
    surrogate = None
    for pred, grad in zip(predictions, grads):
        term = sum_(mul(pred, Tensor(grad)))
        surrogate = term if surrogate is None else surrogate + term
    if surrogate is not None and surrogate.requires_grad:
        surrogate.backward()
