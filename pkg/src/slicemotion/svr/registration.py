from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage

from slicemotion.acquisition import SliceStack, project_slice, render_slice
from slicemotion.geometry import RigidTransform
from slicemotion.volume import Volume3D, resample, trilinear_sample

from .errors import EmptyImageError, SimilarityError
from .optimizer import coordinate_search
from .similarity import ncc, similarity

log = logging.getLogger(__name__)

WORST_SIMILARITY = -2.0


class RegistrationConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    pyramid_factors: tuple[int, ...] = Field(default=(2, 1), min_length=1)
    """Slice downsampling per level, coarse to fine."""
    volume_pyramid_factors: tuple[int, ...] = Field(default=(4, 2, 1), min_length=1)
    """Volume downsampling per level, coarse to fine; ends at full resolution."""
    metric: Literal["ncc", "mse"] = "ncc"
    max_evals: int = Field(default=300, ge=1)
    """Objective evaluations per pyramid level."""
    convergence_tol: float = Field(default=1e-2, gt=0)
    """Stop once every step is below this fraction of its initial size."""
    initial_step_deg: float = Field(default=2.0, gt=0)
    initial_step_mm: float = Field(default=2.0, gt=0)
    search_bounds_deg: float = Field(default=15.0, gt=0)
    search_bounds_mm: float = Field(default=10.0, gt=0)

    @property
    def steps(self) -> np.ndarray:
        return np.array([math.radians(self.initial_step_deg)] * 3 + [self.initial_step_mm] * 3)

    @property
    def bounds(self) -> np.ndarray:
        return np.array([math.radians(self.search_bounds_deg)] * 3 + [self.search_bounds_mm] * 3)


@dataclass(frozen=True)
class RegistrationResult:
    transform: RigidTransform
    metric: float
    history: np.ndarray


def simulate_slice(reference: Volume3D, stack: SliceStack, index: int, T: RigidTransform) -> np.ndarray:
    """The slice the reference would produce under pose T, same model as acquisition."""
    return render_slice(reference, stack, index, T)


def smooth_volume(v: Volume3D, factor: int) -> Volume3D:
    if factor <= 1:
        return v
    sigma = 0.5 * factor * np.ones(3)
    return v.with_data(ndimage.gaussian_filter(np.asarray(v.data, dtype=float), sigma))


def downsample_volume(v: Volume3D, factor: int) -> Volume3D:
    """Blur and resample v onto a grid `factor` times coarser."""
    if factor <= 1:
        return v
    coarse = v.grid.downsampled(factor)
    return Volume3D(trilinear_sample(smooth_volume(v, factor), coarse.world_points()), coarse)


def register_slice_to_volume(
    stack: SliceStack,
    index: int,
    reference: Volume3D,
    T_init: RigidTransform,
    cfg: RegistrationConfig = RegistrationConfig(),
) -> RegistrationResult:
    """Find the pose of one slice that best explains it from the reference.

    Coarse levels compare blurred, subsampled slices against a blurred
    reference. The search box stays centered on T_init at every level.

    """
    image = stack.slices[index]
    if not np.any(image > 0) or np.ptp(image) == 0:
        raise EmptyImageError(f"Slice {index} of the {stack.orientation} stack is empty")

    points = stack.pixel_points(index)
    normal = stack.orientation.normal
    T = T_init
    history = []
    value = WORST_SIMILARITY

    for level, factor in enumerate(cfg.pyramid_factors):
        ref_level = smooth_volume(reference, factor)
        target = ndimage.gaussian_filter(image, 0.5 * (factor - 1)) if factor > 1 else image
        target = target[::factor, ::factor]
        level_points = points[::factor, ::factor]

        def objective(params: np.ndarray) -> float:
            moved = T_init.with_params(params)
            predicted = project_slice(ref_level, level_points, normal, moved, stack.psf_sigma_mm)
            try:
                return similarity(target, predicted, metric=cfg.metric)
            except SimilarityError:
                return WORST_SIMILARITY

        # Later levels start from the previous optimum with finer steps
        steps = cfg.steps / (2**level)
        result = coordinate_search(
            objective,
            T.params,
            steps,
            lower=T_init.params - cfg.bounds,
            upper=T_init.params + cfg.bounds,
            max_evals=cfg.max_evals,
            tol=cfg.convergence_tol,
        )
        T = T_init.with_params(result.x)
        value = result.fun
        history.extend(result.history)

    return RegistrationResult(T, float(value), np.array(history))


def principal_axes(v: Volume3D) -> tuple[np.ndarray, np.ndarray]:
    """Intensity-weighted centroid and eigenvectors (columns, ascending)."""
    weights = np.clip(np.asarray(v.data, dtype=float), 0.0, None).ravel()
    total = weights.sum()
    if total <= 0:
        raise EmptyImageError()

    points = v.grid.world_points().reshape(-1, 3)
    centroid = weights @ points / total
    centered = points - centroid
    moments = (centered * weights[:, None]).T @ centered / total
    _, vectors = np.linalg.eigh(moments)
    return centroid, vectors


def principal_axes_candidates(moving: Volume3D, reference: Volume3D) -> list[RigidTransform]:
    """The four proper rotations aligning reference axes onto moving axes."""
    c_m, E_m = principal_axes(moving)
    c_r, E_r = principal_axes(reference)
    center = reference.grid.center

    candidates = []
    for s1, s2 in itertools.product((1.0, -1.0), repeat=2):
        S = np.diag([s1, s2, 1.0])
        R = E_m @ S @ E_r.T
        if np.linalg.det(R) < 0:
            S[2, 2] = -1.0
            R = E_m @ S @ E_r.T

        M = np.eye(4)
        M[:3, :3] = R
        M[:3, 3] = c_m - R @ c_r
        candidates.append(RigidTransform.from_matrix(M, center=center))
    return candidates


def register_volume_to_volume(
    moving: Volume3D,
    reference: Volume3D,
    cfg: RegistrationConfig = RegistrationConfig(),
) -> RigidTransform:
    """Find T such that moving ≈ resample(reference, T).

    Starts from the best of the four principal-axes alignments by NCC, then
    refines with coordinate search over the volume pyramid.

    """
    for v in (moving, reference):
        if np.ptp(v.data) == 0:
            raise EmptyImageError("Cannot register a constant volume")

    levels = [
        (downsample_volume(moving, f), downsample_volume(reference, f))
        for f in cfg.volume_pyramid_factors
    ]

    def score(T: RigidTransform, mov: Volume3D, ref: Volume3D) -> float:
        try:
            return ncc(mov.data, resample(ref, T, mov.grid).data)
        except SimilarityError:
            return WORST_SIMILARITY

    # Flipped candidates of near-symmetric shapes only separate at fine scales
    fine_mov, fine_ref = levels[-1]
    candidates = principal_axes_candidates(moving, reference)
    T = max(candidates, key=lambda c: score(c, fine_mov, fine_ref))
    log.debug("Principal-axes initialization: %r", T)

    T_init = T
    for level, (mov, ref) in enumerate(levels):
        result = coordinate_search(
            lambda params: score(T_init.with_params(params), mov, ref),
            T.params,
            cfg.steps / (2**level),
            lower=T_init.params - cfg.bounds,
            upper=T_init.params + cfg.bounds,
            max_evals=cfg.max_evals,
            tol=cfg.convergence_tol,
        )
        T = T_init.with_params(result.x)
        log.debug("Volume registration level %d: NCC %.4f", level, result.fun)

    return T

