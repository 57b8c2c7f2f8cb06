from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from pydantic import BaseModel

from slicemotion.geometry import RigidTransform, rotation_angle

from .errors import MetricError

AGGREGATION = (
    "Rotation errors are per-axis Euler angle differences in degrees wrapped to "
    "(-180, 180]; MAE and RMSE are computed per axis over the masked slices, "
    "then averaged over the three axes. Translations likewise in mm."
)


def wrap_degrees(angles) -> np.ndarray:
    """Wrap angles into (-180, 180]."""
    angles = np.asarray(angles, dtype=float)
    return 180.0 - np.mod(180.0 - angles, 360.0)


class SliceError(BaseModel):
    index: int
    rot_error_deg: tuple[float, float, float]
    trans_error_mm: tuple[float, float, float]
    geodesic_deg: float


class MotionErrorReport(BaseModel):
    convention: str = AGGREGATION
    n_slices: int
    mae_rot_deg: float
    rmse_rot_deg: float
    mae_trans_mm: float
    rmse_trans_mm: float
    mean_geodesic_deg: float
    mae_rot_axes_deg: tuple[float, float, float]
    mae_trans_axes_mm: tuple[float, float, float]
    per_slice: list[SliceError]


def motion_errors(
    true_T: Sequence[RigidTransform],
    est_T: Sequence[RigidTransform],
    mask=None,
) -> MotionErrorReport:
    """Per-axis MAE and RMSE of estimated slice motion against the truth.

    mask selects the slices to score (e.g. those containing the object);
    None scores every slice.

    """
    if len(true_T) != len(est_T):
        raise MetricError(f"Got {len(true_T)} true and {len(est_T)} estimated transforms")
    if mask is None:
        mask = np.ones(len(true_T), dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (len(true_T),):
        raise MetricError(f"Mask of shape {mask.shape} does not match {len(true_T)} slices")

    indices = np.flatnonzero(mask)
    if indices.size == 0:
        raise MetricError("No slices selected for evaluation")

    rot = np.array([wrap_degrees(np.degrees(est_T[i].theta - true_T[i].theta)) for i in indices])
    trans = np.array([est_T[i].d - true_T[i].d for i in indices])
    geodesic = np.array(
        [math.degrees(rotation_angle(est_T[i].rotation.T @ true_T[i].rotation)) for i in indices]
    )

    mae_rot = np.mean(np.abs(rot), axis=0)
    rmse_rot = np.sqrt(np.mean(rot**2, axis=0))
    mae_trans = np.mean(np.abs(trans), axis=0)
    rmse_trans = np.sqrt(np.mean(trans**2, axis=0))

    return MotionErrorReport(
        n_slices=int(indices.size),
        mae_rot_deg=float(mae_rot.mean()),
        rmse_rot_deg=float(rmse_rot.mean()),
        mae_trans_mm=float(mae_trans.mean()),
        rmse_trans_mm=float(rmse_trans.mean()),
        mean_geodesic_deg=float(geodesic.mean()),
        mae_rot_axes_deg=tuple(float(x) for x in mae_rot),
        mae_trans_axes_mm=tuple(float(x) for x in mae_trans),
        per_slice=[
            SliceError(
                index=int(i),
                rot_error_deg=tuple(float(x) for x in r),
                trans_error_mm=tuple(float(x) for x in t),
                geodesic_deg=float(g),
            )
            for i, r, t, g in zip(indices, rot, trans, geodesic)
        ],
    )
