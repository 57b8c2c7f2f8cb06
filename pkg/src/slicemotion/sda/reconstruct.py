"""Scattered data approximation.

Slice pixels are mapped through their transforms into world space, deposited
on the nearest voxel of a regular grid, and both the intensity and hit-count
accumulators are blurred with the same isotropic Gaussian. The output is their
ratio (normalized convolution), which removes the bias from uneven sampling
density.
"""

from __future__ import annotations

import logging
from typing import Self, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage

from slicemotion.acquisition import SliceStack
from slicemotion.geometry import RigidTransform, apply_to_point
from slicemotion.parallel import map_ordered
from slicemotion.volume import Grid, Volume3D

from .errors import EmptyInputError, ScheduleIndexError, SdaError

log = logging.getLogger(__name__)


class SdaConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigma_first_mm: float = Field(default=0.8, gt=0)
    sigma_last_mm: float = Field(default=0.52, gt=0)
    n_iterations: int = Field(default=4, ge=1)
    target_grid: Grid | None = None
    normalize: bool = True
    count_epsilon: float = Field(default=1e-6, gt=0)
    truncate: float = Field(default=3.0, gt=0)

    @model_validator(mode="after")
    def _check_schedule(self) -> Self:
        if self.sigma_first_mm < self.sigma_last_mm:
            raise ValueError("sigma_first_mm must be at least sigma_last_mm")
        return self


def sigma_schedule(iteration: int, cfg: SdaConfig = SdaConfig()) -> float:
    """Kernel width for a 1-based iteration, decaying linearly to the last value."""
    if not 1 <= iteration <= cfg.n_iterations:
        raise ScheduleIndexError(
            f"Iteration {iteration} is outside 1..{cfg.n_iterations}"
        )
    if cfg.n_iterations == 1:
        return cfg.sigma_first_mm

    frac = (iteration - 1) / (cfg.n_iterations - 1)
    return cfg.sigma_first_mm + frac * (cfg.sigma_last_mm - cfg.sigma_first_mm)


def deposit(
    stack: SliceStack,
    transforms: Sequence[RigidTransform],
    grid: Grid,
    keep: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-voxel intensity sum and hit count of one stack, both flat."""
    values = np.zeros(grid.n_voxels)
    counts = np.zeros(grid.n_voxels)
    upper = np.asarray(grid.dims) - 1

    for i in range(stack.n_slices):
        if keep is not None and not keep[i]:
            continue

        world = apply_to_point(transforms[i], stack.pixel_points(i)).reshape(-1, 3)
        idx = np.rint(grid.world_to_index(world)).astype(np.int64)
        inside = np.all((idx >= 0) & (idx <= upper), axis=1)
        if not np.any(inside):
            continue

        flat = np.ravel_multi_index(idx[inside].T, grid.dims)
        values += np.bincount(flat, weights=stack.slices[i].reshape(-1)[inside], minlength=grid.n_voxels)
        counts += np.bincount(flat, minlength=grid.n_voxels)

    return values, counts


def sda_reconstruct(
    stacks: Sequence[SliceStack],
    transforms: Sequence[Sequence[RigidTransform]] | None,
    sigma_mm: float,
    grid: Grid,
    *,
    cfg: SdaConfig = SdaConfig(),
    keep_masks: Sequence[np.ndarray] | None = None,
) -> Volume3D:
    """Reconstruct a volume on grid from slices placed by their transforms.

    transforms holds one list per stack; None uses each stack's est_transforms.
    keep_masks optionally excludes slices per stack.

    """
    if not stacks or all(s.n_slices == 0 for s in stacks):
        raise EmptyInputError()
    if sigma_mm <= 0:
        raise SdaError(f"sigma_mm must be positive, got {sigma_mm}")

    if transforms is None:
        transforms = [s.est_transforms for s in stacks]
    if len(transforms) != len(stacks):
        raise SdaError(f"Got {len(transforms)} transform lists for {len(stacks)} stacks")
    for stack, ts in zip(stacks, transforms):
        if len(ts) != stack.n_slices:
            raise SdaError(f"Got {len(ts)} transforms for a stack of {stack.n_slices} slices")

    masks = keep_masks if keep_masks is not None else [None] * len(stacks)
    parts = map_ordered(
        lambda args: deposit(args[0], args[1], grid, args[2]),
        list(zip(stacks, transforms, masks)),
    )

    # Fixed reduction order keeps the result independent of the worker count
    values = np.zeros(grid.n_voxels)
    counts = np.zeros(grid.n_voxels)
    for v, c in parts:
        values += v
        counts += c

    n_hit = int(np.count_nonzero(counts))
    if not n_hit:
        raise EmptyInputError("No slice pixel landed inside the target grid")

    sigma_vox = sigma_mm / grid.spacing

    def blur(a: np.ndarray) -> np.ndarray:
        return ndimage.gaussian_filter(
            a.reshape(grid.dims), sigma=sigma_vox, truncate=cfg.truncate, mode="constant"
        )

    values = blur(values)

    if cfg.normalize:
        counts = blur(counts)
        data = np.zeros(grid.dims)
        np.divide(values, counts, out=data, where=counts > cfg.count_epsilon)
    else:
        data = values

    log.debug(
        "SDA from %d stacks, sigma %.3f mm, %d hit voxels",
        len(stacks),
        sigma_mm,
        n_hit,
    )
    return Volume3D(data, grid)
