from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Annotated, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage

from slicemotion.geometry import RigidTransform, apply_to_point, invert

from .errors import VolumeError

PositiveInt = Annotated[int, Field(ge=1)]
PositiveFloat = Annotated[float, Field(gt=0)]


class Grid(BaseModel):
    """A regular, axis-aligned sampling grid in world coordinates (mm).

    Voxel (i, j, k) sits at ``origin + spacing * (i, j, k)``.

    """

    model_config = ConfigDict(frozen=True)

    dims: tuple[PositiveInt, PositiveInt, PositiveInt]
    spacing_mm: tuple[PositiveFloat, PositiveFloat, PositiveFloat]
    origin_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @classmethod
    def centered(
        cls,
        dims: tuple[int, int, int],
        spacing_mm: float | tuple[float, float, float],
        center_mm=(0.0, 0.0, 0.0),
    ) -> Self:
        spacing = np.broadcast_to(np.asarray(spacing_mm, dtype=float), (3,))
        origin = np.asarray(center_mm, dtype=float) - spacing * (np.asarray(dims) - 1) / 2
        return cls(
            dims=tuple(int(n) for n in dims),
            spacing_mm=tuple(float(s) for s in spacing),
            origin_mm=tuple(float(o) for o in origin),
        )

    @property
    def spacing(self) -> np.ndarray:
        return np.asarray(self.spacing_mm, dtype=float)

    @property
    def origin(self) -> np.ndarray:
        return np.asarray(self.origin_mm, dtype=float)

    @property
    def center(self) -> np.ndarray:
        return self.origin + self.spacing * (np.asarray(self.dims) - 1) / 2

    @property
    def extent_mm(self) -> np.ndarray:
        return self.spacing * (np.asarray(self.dims) - 1)

    @property
    def affine(self) -> np.ndarray:
        A = np.diag([*self.spacing, 1.0])
        A[:3, 3] = self.origin
        return A

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.dims))

    def world_points(self) -> np.ndarray:
        axes = [o + s * np.arange(n) for o, s, n in zip(self.origin, self.spacing, self.dims)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def world_to_index(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.origin) / self.spacing

    def downsampled(self, factor: int) -> Grid:
        """A coarser grid covering the same extent about the same center."""
        if factor <= 1:
            return self
        dims = tuple(max(1, n // factor) for n in self.dims)
        spacing = self.extent_mm / np.maximum(np.asarray(dims) - 1, 1)
        spacing = np.where(np.asarray(dims) > 1, spacing, self.spacing * factor)
        return Grid.centered(dims, tuple(spacing), self.center)


@dataclass(frozen=True, eq=False)
class Volume3D:
    data: np.ndarray
    grid: Grid

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 3 or tuple(data.shape) != tuple(self.grid.dims):
            raise VolumeError(
                f"Data shape {data.shape} does not match grid dims {self.grid.dims}"
            )
        if data.dtype not in (np.float32, np.float64):
            data = data.astype(np.float64)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, grid: Grid) -> Self:
        return cls(np.zeros(grid.dims), grid)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.grid.dims

    @property
    def spacing(self) -> np.ndarray:
        return self.grid.spacing

    @property
    def origin(self) -> np.ndarray:
        return self.grid.origin

    @property
    def affine(self) -> np.ndarray:
        return self.grid.affine

    @cached_property
    def intensity_max(self) -> float:
        return float(np.max(self.data))

    def with_data(self, data: np.ndarray) -> Volume3D:
        return Volume3D(data, self.grid)

    def normalize(self) -> Volume3D:
        """Clamp negatives to zero and scale so that the maximum intensity is 1."""
        data = np.clip(np.asarray(self.data, dtype=np.float64), 0.0, None)
        peak = data.max()
        if peak > 0:
            data = data / peak
        return self.with_data(data)

    def flipped(self, axis: int) -> Volume3D:
        return self.with_data(np.flip(self.data, axis=axis).copy())


def trilinear_sample(v: Volume3D, points) -> np.ndarray:
    """Sample v at world points (..., 3); exactly 0 outside the grid."""
    points = np.asarray(points, dtype=float)
    idx = v.grid.world_to_index(points).reshape(-1, 3)

    upper = np.asarray(v.dims) - 1
    inside = np.all((idx >= 0) & (idx <= upper), axis=1)

    out = np.zeros(idx.shape[0])
    if np.any(inside):
        out[inside] = ndimage.map_coordinates(
            np.asarray(v.data, dtype=np.float64),
            idx[inside].T,
            order=1,
            mode="nearest",
            prefilter=False,
        )
    return out.reshape(points.shape[:-1])


def trilinear_weights(grid: Grid, points) -> tuple[np.ndarray, np.ndarray]:
    """Flat voxel indices and weights of the 8 trilinear corners of each point.

    Returns arrays of shape (M, 8). Points outside the grid get all-zero weights,
    matching the zero padding of trilinear_sample.

    """
    idx = grid.world_to_index(np.asarray(points, dtype=float).reshape(-1, 3))
    dims = np.asarray(grid.dims)
    upper = dims - 1
    inside = np.all((idx >= 0) & (idx <= upper), axis=1)

    base = np.clip(np.floor(idx), 0, np.maximum(upper - 1, 0)).astype(np.int64)
    frac = np.where(upper > 0, idx - base, 0.0)

    indices = np.empty((idx.shape[0], 8), dtype=np.int64)
    weights = np.empty((idx.shape[0], 8))
    corner = 0
    for di in (0, 1):
        for dj in (0, 1):
            for dk in (0, 1):
                offset = np.array([di, dj, dk])
                ijk = np.minimum(base + offset, upper)
                w = np.prod(np.where(offset == 1, frac, 1.0 - frac), axis=1)
                indices[:, corner] = np.ravel_multi_index(ijk.T, grid.dims)
                weights[:, corner] = np.where(inside, w, 0.0)
                corner += 1

    return indices, weights


def resample(v: Volume3D, T: RigidTransform, target: Grid | None = None) -> Volume3D:
    """Move v by T and sample it onto target (defaults to v's own grid).

    The output voxel at world point p holds v(T⁻¹ p).

    """
    if target is None:
        target = v.grid

    points = apply_to_point(invert(T), target.world_points())
    return Volume3D(trilinear_sample(v, points), target)
