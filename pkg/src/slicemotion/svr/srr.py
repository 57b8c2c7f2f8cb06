"""Least-squares super-resolution reconstruction.

Solves ``min_x Σ_s ‖A_s x - y_s‖² + w ‖L x‖²`` by conjugate gradients on the
normal equations, where A_s is the slice acquisition operator (trilinear
interpolation of the through-plane PSF samples) and L is the 7-point discrete
Laplacian in voxel units with zero boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage, sparse
from scipy.sparse import linalg as spla

from slicemotion.acquisition import SliceStack, psf_quadrature
from slicemotion.geometry import RigidTransform, apply_to_point
from slicemotion.volume import Grid, Volume3D, trilinear_weights

from .errors import NoKeptSlicesError, ReconstructionError

log = logging.getLogger(__name__)


class SrrConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    regularization_weight: float = Field(default=0.01, ge=0)
    max_cg_iterations: int = Field(default=50, ge=1)
    target_spacing_mm: float = Field(default=2.4, gt=0)
    cg_rtol: float = Field(default=1e-6, gt=0)


@dataclass(frozen=True)
class SrrResult:
    volume: Volume3D
    objective_history: np.ndarray
    n_iterations: int


def slice_operator_rows(
    stack: SliceStack,
    index: int,
    T: RigidTransform,
    grid: Grid,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """COO entries (pixel, voxel, weight) of one slice's acquisition operator."""
    offsets, psf = psf_quadrature(stack.psf_sigma_mm)
    points = stack.pixel_points(index).reshape(-1, 3)
    normal = stack.orientation.normal
    n_pixels = len(points)

    rows, cols, vals = [], [], []
    for t, w in zip(offsets, psf):
        indices, weights = trilinear_weights(grid, apply_to_point(T, points + t * normal))
        rows.append(np.repeat(np.arange(n_pixels), 8))
        cols.append(indices.ravel())
        vals.append(w * weights.ravel())

    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def acquisition_operator(
    stacks: Sequence[SliceStack],
    transforms: Sequence[Sequence[RigidTransform]],
    keep_masks: Sequence[np.ndarray] | None,
    grid: Grid,
) -> tuple[sparse.csr_matrix, np.ndarray]:
    """Stack every kept slice's operator into one sparse A with observations y."""
    if keep_masks is None:
        keep_masks = [np.ones(s.n_slices, dtype=bool) for s in stacks]

    rows, cols, vals, ys = [], [], [], []
    offset = 0
    for stack, ts, keep in zip(stacks, transforms, keep_masks, strict=True):
        if len(ts) != stack.n_slices:
            raise ReconstructionError(
                f"Got {len(ts)} transforms for a stack of {stack.n_slices} slices"
            )
        for i in np.flatnonzero(keep):
            r, c, v = slice_operator_rows(stack, i, ts[i], grid)
            rows.append(r + offset)
            cols.append(c)
            vals.append(v)
            ys.append(stack.slices[i].ravel())
            offset += stack.slices[i].size

    if not ys:
        raise NoKeptSlicesError()

    A = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(offset, grid.n_voxels),
    ).tocsr()
    return A, np.concatenate(ys)


def laplacian(x: np.ndarray, dims: tuple[int, int, int]) -> np.ndarray:
    return ndimage.laplace(x.reshape(dims), mode="constant").ravel()


def srr_least_squares(
    stacks: Sequence[SliceStack],
    transforms: Sequence[Sequence[RigidTransform]] | None,
    keep_masks: Sequence[np.ndarray] | None,
    cfg: SrrConfig = SrrConfig(),
    *,
    grid: Grid | None = None,
) -> SrrResult:
    """Reconstruct a volume by regularized least squares; the result is clamped at 0.

    grid defaults to a cube of cfg.target_spacing_mm voxels spanning the
    stacks' field of view.

    """
    if not stacks:
        raise NoKeptSlicesError()
    if transforms is None:
        transforms = [s.est_transforms for s in stacks]
    if grid is None:
        grid = srr_grid(stacks, cfg.target_spacing_mm)

    A, y = acquisition_operator(stacks, transforms, keep_masks, grid)
    w = cfg.regularization_weight
    dims = grid.dims

    def normal_matvec(x: np.ndarray) -> np.ndarray:
        out = A.T @ (A @ x)
        if w > 0:
            out = out + w * laplacian(laplacian(x, dims), dims)
        return out

    H = spla.LinearOperator((grid.n_voxels, grid.n_voxels), matvec=normal_matvec, dtype=float)

    def objective(x: np.ndarray) -> float:
        r = A @ x - y
        value = float(r @ r)
        if w > 0:
            lx = laplacian(x, dims)
            value += w * float(lx @ lx)
        return value

    history = [objective(np.zeros(grid.n_voxels))]
    x, info = spla.cg(
        H,
        A.T @ y,
        x0=np.zeros(grid.n_voxels),
        rtol=cfg.cg_rtol,
        maxiter=cfg.max_cg_iterations,
        callback=lambda xk: history.append(objective(xk)),
    )
    if info > 0:
        log.debug("CG stopped at the iteration cap (%d) before converging", cfg.max_cg_iterations)

    log.info(
        "SRR: %d observations, %d voxels, objective %.4g -> %.4g in %d iterations",
        A.shape[0],
        grid.n_voxels,
        history[0],
        history[-1],
        len(history) - 1,
    )
    data = np.clip(x, 0.0, None).reshape(dims)
    return SrrResult(Volume3D(data, grid), np.array(history), len(history) - 1)


def srr_grid(stacks: Sequence[SliceStack], spacing_mm: float) -> Grid:
    """A cube centered on the first stack that covers every stack's extent."""
    extent = 0.0
    for stack in stacks:
        nu, nv = stack.shape
        extent = max(
            extent,
            nu * stack.in_plane_spacing_mm[0],
            nv * stack.in_plane_spacing_mm[1],
            float(np.ptp(stack.positions_mm)) + stack.slice_thickness_mm,
        )
    n = max(int(round(extent / spacing_mm)), 1)
    return Grid.centered((n, n, n), spacing_mm, stacks[0].center_mm)
