from typing import Annotated

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage

from slicemotion.rng import substream

from .grid import Grid, Volume3D

SEMI_AXIS_RATIOS = np.array([1.0, 0.8, 0.65])
SHELL_LEVELS = (0.6, 1.0)
N_FEATURES = 4


class PhantomSpec(BaseModel):
    """Parameters of a nested-ellipsoid stand-in for a reconstructed head."""

    model_config = ConfigDict(frozen=True)

    size_mm: float = Field(default=90.0, gt=0)
    feature_seed: int = 0
    n_shells: int = Field(default=3, ge=1)
    texture_amplitude: float = Field(default=0.3, ge=0, le=1)
    dims: tuple[
        Annotated[int, Field(ge=1)],
        Annotated[int, Field(ge=1)],
        Annotated[int, Field(ge=1)],
    ] = (96, 96, 72)
    spacing_mm: float = Field(default=1.6, gt=0)
    smoothing_mm: float = Field(default=2.0, ge=0)
    scale: float = Field(default=1.0, gt=0)

    @property
    def grid(self) -> Grid:
        return Grid.centered(self.dims, self.spacing_mm)

    @property
    def semi_axes_mm(self) -> np.ndarray:
        return self.size_mm / 2 * SEMI_AXIS_RATIOS * self.scale


def _ellipsoid(points: np.ndarray, center: np.ndarray, semi_axes: np.ndarray) -> np.ndarray:
    return np.sum(((points - center) / semi_axes) ** 2, axis=-1) <= 1.0


def make_phantom(spec: PhantomSpec) -> Volume3D:
    """Build a deterministic, asymmetric phantom normalized to a maximum of 1.

    Shell k is an ellipsoid shrunk by (n_shells - k) / n_shells and shifted
    toward the positive axes, so no mirror plane maps the phantom onto itself.
    Texture (smooth noise plus a few bright blobs) scales with texture_amplitude
    and vanishes at 0.

    """
    grid = spec.grid
    points = grid.world_points()
    axes = spec.semi_axes_mm
    rng = substream(spec.feature_seed, "phantom")

    data = np.zeros(grid.dims)
    for k in range(spec.n_shells):
        shrink = (spec.n_shells - k) / spec.n_shells
        center = k * np.array([0.08, 0.06, 0.05]) * axes
        inside = _ellipsoid(points, center, axes * shrink)
        data[inside] = SHELL_LEVELS[k % 2]

    support = data > 0

    # Draws are made unconditionally so the stream does not depend on amplitude
    noise = rng.standard_normal(grid.dims)
    blob_centers = rng.uniform(-0.55, 0.55, size=(N_FEATURES, 3)) * axes
    blob_radii = rng.uniform(4.0, 8.0, size=N_FEATURES) * spec.scale

    if spec.texture_amplitude > 0:
        field = ndimage.gaussian_filter(noise, sigma=4.0 / grid.spacing)
        field /= max(float(np.max(np.abs(field))), 1e-12)
        data = data * (1.0 + spec.texture_amplitude * field)

        for center, radius in zip(blob_centers, blob_radii):
            blob = _ellipsoid(points, center, np.full(3, radius)) & support
            data[blob] += 0.8 * spec.texture_amplitude

    if spec.smoothing_mm > 0:
        data = ndimage.gaussian_filter(data, sigma=spec.smoothing_mm / grid.spacing, truncate=3.0)

    return Volume3D(data, grid).normalize()
