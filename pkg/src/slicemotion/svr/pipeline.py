"""Coarse-to-fine motion correction.

An optional learned pass (or a volume-to-volume alignment) supplies initial
slice poses. Slice-to-volume registration then alternates with reference
refreshes, outlier slices are rejected, and a final super-resolution
reconstruction is computed from the surviving slices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from slicemotion.acquisition import SliceStack
from slicemotion.geometry import RigidTransform, invert
from slicemotion.parallel import map_ordered
from slicemotion.sda import SdaConfig, sda_reconstruct
from slicemotion.volume import Grid, Volume3D, resample

from .errors import EmptyImageError, RegistrationError, SimilarityError
from .registration import RegistrationConfig, register_slice_to_volume, register_volume_to_volume
from .rejection import reject_outlier_slices
from .similarity import ncc
from .srr import SrrConfig, srr_grid, srr_least_squares

if TYPE_CHECKING:
    from slicemotion.estimator import EstimatorParams

log = logging.getLogger(__name__)


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_outer: int = Field(default=3, ge=0)
    """Registration / reference refresh rounds."""
    init: Literal["identity", "volume"] = "identity"
    """Initial poses when no learned coarse pass runs."""
    coarse: Literal["affirm", "none"] = "none"
    refresh: Literal["sda", "srr"] = "sda"
    refresh_sigma_mm: float = Field(default=1.2, gt=0)
    """SDA kernel width used for reference refreshes."""
    n_recurrences: int = Field(default=4, ge=1)
    reject: bool = True
    rejection_threshold: float | None = None
    """Fixed NCC threshold; None uses the median/MAD rule."""

    registration: RegistrationConfig = RegistrationConfig()
    srr: SrrConfig = SrrConfig()
    sda: SdaConfig = SdaConfig()


@dataclass
class PipelineResult:
    transforms: list[list[RigidTransform]]
    volume: Volume3D
    keep_masks: list[np.ndarray]
    initial_transforms: list[list[RigidTransform]]
    objective_history: np.ndarray
    """SRR objective per CG iteration of the final reconstruction."""

    def corrected_stacks(self, stacks: Sequence[SliceStack]) -> list[SliceStack]:
        return [s.with_estimates(ts) for s, ts in zip(stacks, self.transforms)]


def select_initial_reference(
    stacks: Sequence[SliceStack],
    atlas: Volume3D,
    grid: Grid,
    *,
    sigma_mm: float = 1.2,
    sda_cfg: SdaConfig = SdaConfig(),
) -> tuple[int, Volume3D]:
    """Index and single-stack SDA volume of the stack that best matches the atlas."""
    atlas_on_grid = resample(atlas, RigidTransform.identity(grid.center), grid)

    best_index, best_volume, best_score = 0, None, -np.inf
    for index, stack in enumerate(stacks):
        volume = sda_reconstruct([stack], None, sigma_mm, grid, cfg=sda_cfg)
        try:
            score = ncc(volume.data, atlas_on_grid.data)
        except SimilarityError:
            continue
        log.debug("Stack %d (%s) matches the atlas with NCC %.4f", index, stack.orientation, score)
        if score > best_score:
            best_index, best_volume, best_score = index, volume, score

    if best_volume is None:
        raise EmptyImageError("No stack produced a usable reference volume")
    return best_index, best_volume


def volume_initialization(
    stacks: Sequence[SliceStack],
    atlas: Volume3D,
    grid: Grid,
    cfg: PipelineConfig = PipelineConfig(),
) -> list[list[RigidTransform]]:
    """Every slice of a stack gets the inverse of that stack's volume alignment to the atlas."""
    transforms = []
    for stack in stacks:
        volume = sda_reconstruct([stack], None, cfg.refresh_sigma_mm, grid, cfg=cfg.sda)
        # volume ≈ resample(atlas, T), so slice poses relative to the atlas are T⁻¹
        T = register_volume_to_volume(volume, atlas, cfg.registration)
        pose = invert(T).with_center(stack.center_mm)
        log.info("Volume initialization of the %s stack: %r", stack.orientation, pose)
        transforms.append([pose] * stack.n_slices)
    return transforms


def affirm_initialization(
    stacks: Sequence[SliceStack],
    params: EstimatorParams,
    grid: Grid,
    cfg: PipelineConfig = PipelineConfig(),
    *,
    atlas: Volume3D | None = None,
) -> list[list[RigidTransform]]:
    from slicemotion.estimator import affirm_forward

    if atlas is not None:
        index, reference = select_initial_reference(
            stacks, atlas, grid, sigma_mm=cfg.refresh_sigma_mm, sda_cfg=cfg.sda
        )
    else:
        index = 0
        reference = sda_reconstruct([stacks[0]], None, cfg.refresh_sigma_mm, grid, cfg=cfg.sda)
    log.info("Learned coarse pass from the %s stack reference", stacks[index].orientation)

    out = affirm_forward(stacks, reference, params, cfg.n_recurrences, sda_cfg=cfg.sda)
    return out.transforms


def refresh_reference(
    stacks: Sequence[SliceStack],
    transforms: Sequence[Sequence[RigidTransform]],
    grid: Grid,
    cfg: PipelineConfig = PipelineConfig(),
    keep_masks: Sequence[np.ndarray] | None = None,
) -> Volume3D:
    if cfg.refresh == "srr":
        return srr_least_squares(stacks, transforms, keep_masks, cfg.srr, grid=grid).volume
    return sda_reconstruct(
        stacks, transforms, cfg.refresh_sigma_mm, grid, cfg=cfg.sda, keep_masks=keep_masks
    )


def register_all_slices(
    stacks: Sequence[SliceStack],
    transforms: Sequence[Sequence[RigidTransform]],
    reference: Volume3D,
    cfg: RegistrationConfig = RegistrationConfig(),
) -> tuple[list[list[RigidTransform]], float]:
    """Register every object slice; returns new poses and the mean final similarity."""
    jobs = [
        (s, i)
        for s, stack in enumerate(stacks)
        for i in np.flatnonzero(stack.brain_mask)
    ]

    def register(job: tuple[int, int]) -> tuple[RigidTransform, float] | None:
        s, i = job
        try:
            result = register_slice_to_volume(stacks[s], int(i), reference, transforms[s][i], cfg)
        except EmptyImageError:
            return None
        return result.transform, result.metric

    results = map_ordered(register, jobs)

    updated = [list(ts) for ts in transforms]
    metrics = []
    for (s, i), result in zip(jobs, results):
        if result is None:
            continue
        updated[s][i], metric = result
        metrics.append(metric)

    return updated, float(np.mean(metrics)) if metrics else float("nan")


def run_coarse_to_fine(
    stacks: Sequence[SliceStack],
    estimator_params: EstimatorParams | None = None,
    cfg: PipelineConfig = PipelineConfig(),
    *,
    atlas: Volume3D | None = None,
    grid: Grid | None = None,
) -> PipelineResult:
    if not stacks:
        raise RegistrationError("At least one stack is required")
    if grid is None:
        grid = srr_grid(stacks, cfg.srr.target_spacing_mm)

    if cfg.coarse == "affirm":
        if estimator_params is None:
            raise RegistrationError("The learned coarse pass needs estimator parameters")
        transforms = affirm_initialization(stacks, estimator_params, grid, cfg, atlas=atlas)
    elif cfg.init == "volume":
        if atlas is None:
            raise RegistrationError("Volume initialization needs an atlas volume")
        transforms = volume_initialization(stacks, atlas, grid, cfg)
    else:
        transforms = [list(s.est_transforms) for s in stacks]
    initial = [list(ts) for ts in transforms]

    for k in range(1, cfg.n_outer + 1):
        reference = refresh_reference(stacks, transforms, grid, cfg)
        transforms, metric = register_all_slices(stacks, transforms, reference, cfg.registration)
        log.info("Outer iteration %d/%d: mean slice similarity %.4f", k, cfg.n_outer, metric)

    if cfg.reject:
        reference = refresh_reference(stacks, transforms, grid, cfg)
        keep_masks = reject_outlier_slices(
            stacks, transforms, reference, threshold=cfg.rejection_threshold
        )
    else:
        keep_masks = [np.ones(s.n_slices, dtype=bool) for s in stacks]

    result = srr_least_squares(stacks, transforms, keep_masks, cfg.srr, grid=grid)
    return PipelineResult(transforms, result.volume, keep_masks, initial, result.objective_history)
