"""Image quality metrics against a ground-truth volume."""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel
from skimage.metrics import normalized_root_mse, structural_similarity

from slicemotion.geometry import RigidTransform, invert
from slicemotion.svr import RegistrationConfig, register_volume_to_volume
from slicemotion.volume import Volume3D, resample

from .errors import ConstantReferenceError, MetricError

SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5
"""Gives an 11-voxel window at σ = 1.5; every axis must be at least that long."""


class ImageQualityReport(BaseModel):
    ssim: float
    nrmse: float


def _arrays(v, ref) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(v.data if isinstance(v, Volume3D) else v, dtype=np.float64)
    b = np.asarray(ref.data if isinstance(ref, Volume3D) else ref, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"Shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def _structural_similarity(v, ref, data_range: float | None) -> tuple[float, np.ndarray]:
    x, y = _arrays(v, ref)
    if data_range is None:
        data_range = float(np.ptp(y)) or 1.0
    try:
        return structural_similarity(
            x,
            y,
            data_range=data_range,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            truncate=SSIM_TRUNCATE,
            use_sample_covariance=False,
            full=True,
        )
    except ValueError as e:
        raise MetricError(f"Cannot compute SSIM of shape {x.shape}: {e}") from e


def ssim_map(v, ref, *, data_range: float | None = None) -> np.ndarray:
    """Local SSIM with a Gaussian window; dynamic range taken from ref by default."""
    return _structural_similarity(v, ref, data_range)[1]


def ssim(v, ref, *, data_range: float | None = None) -> float:
    """Mean local SSIM over voxels whose window lies inside the volume."""
    return float(_structural_similarity(v, ref, data_range)[0])


def dssim_map(v: Volume3D, ref: Volume3D, *, data_range: float | None = None) -> Volume3D:
    """Structural dissimilarity (1 - SSIM) / 2 per voxel, on ref's grid."""
    return Volume3D((1.0 - ssim_map(v, ref, data_range=data_range)) / 2.0, ref.grid)


def nrmse(v, ref) -> float:
    """RMSE normalized by the reference intensity range, clipped to [0, 1]."""
    x, y = _arrays(v, ref)
    if np.ptp(y) == 0:
        raise ConstantReferenceError()
    value = normalized_root_mse(y, x, normalization="min-max")
    return float(np.clip(value, 0.0, 1.0))


def align_to_reference(
    volume: Volume3D,
    ref: Volume3D,
    cfg: RegistrationConfig = RegistrationConfig(),
) -> tuple[Volume3D, RigidTransform]:
    """Rigidly align volume to ref and resample it onto ref's grid.

    Returns the aligned volume and T with volume ≈ resample(ref, T).

    """
    on_grid = resample(volume, RigidTransform.identity(ref.grid.center), ref.grid)
    T = register_volume_to_volume(on_grid, ref, cfg)
    return resample(on_grid, invert(T), ref.grid), T


def image_quality(v: Volume3D, ref: Volume3D) -> ImageQualityReport:
    return ImageQualityReport(ssim=ssim(v, ref), nrmse=nrmse(v, ref))
