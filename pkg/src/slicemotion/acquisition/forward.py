from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Annotated

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from slicemotion.geometry import RigidTransform, apply_to_point
from slicemotion.parallel import map_ordered
from slicemotion.rng import substream
from slicemotion.volume import Volume3D, trilinear_sample

from .errors import TrajectoryLengthError
from .stack import (
    Orientation,
    SliceStack,
    in_plane_points,
    interleaved_order,
    psf_quadrature,
    slice_positions,
)

if TYPE_CHECKING:
    from slicemotion.motionsim import MotionTrajectory

log = logging.getLogger(__name__)

FWHM_TO_SIGMA = 1 / 2.355


class AcquisitionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_slices: int = Field(default=24, ge=1)
    thickness_mm: float = Field(default=4.0, gt=0)
    psf_sigma_mm: float | None = Field(default=None, gt=0)
    """Through-plane PSF std; defaults to a FWHM equal to the slice thickness."""
    interleaved: bool = False
    noise_sigma: float = Field(default=0.0, ge=0)
    in_plane_shape: tuple[Annotated[int, Field(ge=1)], Annotated[int, Field(ge=1)]] = (48, 48)
    in_plane_spacing_mm: float = Field(default=2.4, gt=0)
    mask_pixel_fraction: float = Field(default=0.01, ge=0, le=1)
    mask_intensity_fraction: float = Field(default=0.05, ge=0, le=1)
    seed: int = 0

    @property
    def sigma_mm(self) -> float:
        if self.psf_sigma_mm is not None:
            return self.psf_sigma_mm
        return self.thickness_mm * FWHM_TO_SIGMA

    @property
    def spacing(self) -> tuple[float, float]:
        return self.in_plane_spacing_mm, self.in_plane_spacing_mm


def project_slice(
    v: Volume3D,
    points: np.ndarray,
    normal: np.ndarray,
    T: RigidTransform,
    sigma_mm: float,
) -> np.ndarray:
    """Integrate v through the PSF along the normal at each moved pixel center."""
    offsets, weights = psf_quadrature(sigma_mm)
    profile = points[None] + offsets[:, None, None, None] * normal
    samples = trilinear_sample(v, apply_to_point(T, profile))
    return np.tensordot(weights, samples, axes=1)


def render_slice(v: Volume3D, stack: SliceStack, index: int, T: RigidTransform) -> np.ndarray:
    """The noise-free slice `index` of `stack` that v would produce under pose T."""
    return project_slice(
        v,
        stack.pixel_points(index),
        stack.orientation.normal,
        T,
        stack.psf_sigma_mm,
    )


def contains_object(
    image: np.ndarray,
    intensity_max: float,
    cfg: AcquisitionConfig = AcquisitionConfig(),
) -> bool:
    """Whether enough pixels are bright enough for the slice to count as object."""
    bright = image > cfg.mask_intensity_fraction * intensity_max
    return bool(np.mean(bright) >= cfg.mask_pixel_fraction) and bool(np.any(bright))


def acquire_slice(
    v: Volume3D,
    T_s: RigidTransform,
    orientation: Orientation,
    slice_index: int,
    cfg: AcquisitionConfig,
    *,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Acquire one slice of v at pose T_s.

    Pixels integrate v along the slice normal with a 7-point Gaussian
    quadrature over ±2.5σ. Noise is added after integration.

    """
    orientation = Orientation(orientation)
    position = slice_positions(cfg.n_slices, cfg.thickness_mm)[slice_index]
    points = in_plane_points(
        orientation, position, v.grid.center, cfg.in_plane_shape, cfg.spacing
    )
    image = project_slice(v, points, orientation.normal, T_s, cfg.sigma_mm)

    if cfg.noise_sigma > 0:
        if rng is None:
            rng = substream(cfg.seed, "noise", orientation.value, slice_index)
        image = image + rng.normal(0.0, cfg.noise_sigma, size=image.shape)
    return image


def acquire_stack(
    v: Volume3D,
    traj: MotionTrajectory,
    orientation: Orientation,
    cfg: AcquisitionConfig,
) -> SliceStack:
    """Acquire a full stack, slice acquired at time step t using trajectory sample t."""
    orientation = Orientation(orientation)
    n = cfg.n_slices
    if len(traj.samples) != n:
        raise TrajectoryLengthError(
            f"Trajectory has {len(traj.samples)} samples for {n} slices"
        )

    center = v.grid.center
    order = interleaved_order(n) if cfg.interleaved else np.arange(n)

    times = np.empty(n)
    true: list[RigidTransform] = [RigidTransform.identity(center)] * n
    for t, index in enumerate(order):
        sample = traj.samples[t]
        true[index] = RigidTransform(theta=sample.theta, d=sample.d, center=center)
        times[index] = traj.times_s[t]

    def acquire(index: int) -> tuple[np.ndarray, bool]:
        clean = acquire_slice(
            v, true[index], orientation, index, cfg.model_copy(update={"noise_sigma": 0.0})
        )
        keep = contains_object(clean, v.intensity_max, cfg)
        if cfg.noise_sigma > 0:
            rng = substream(cfg.seed, "noise", orientation.value, index)
            clean = clean + rng.normal(0.0, cfg.noise_sigma, size=clean.shape)
        return clean, keep

    results = map_ordered(acquire, range(n))
    slices = np.stack([image for image, _ in results])
    mask = np.array([keep for _, keep in results])

    log.debug(
        "Acquired %s stack: %d slices, %d containing object",
        orientation.value,
        n,
        int(mask.sum()),
    )
    return SliceStack(
        slices=slices,
        orientation=orientation,
        slice_thickness_mm=cfg.thickness_mm,
        in_plane_spacing_mm=cfg.spacing,
        positions_mm=slice_positions(n, cfg.thickness_mm),
        psf_sigma_mm=cfg.sigma_mm,
        center_mm=center,
        true_transforms=true,
        brain_mask=mask,
        acquisition_order=order,
        slice_times_s=times,
    )
