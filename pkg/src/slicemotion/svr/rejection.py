import logging
from typing import Sequence

import numpy as np
from scipy import stats

from slicemotion.acquisition import SliceStack
from slicemotion.geometry import RigidTransform
from slicemotion.volume import Volume3D

from .errors import SimilarityError
from .registration import simulate_slice
from .similarity import ncc

log = logging.getLogger(__name__)

MAD_FACTOR = 2.0
# Nearly identical scores collapse the MAD; the threshold still stays this far below the median
MIN_MARGIN = 0.1


def slice_scores(
    stacks: Sequence[SliceStack],
    transforms: Sequence[Sequence[RigidTransform]],
    reference: Volume3D,
) -> list[np.ndarray]:
    """NCC of every object slice against its simulation; NaN for other slices."""
    scores = []
    for stack, ts in zip(stacks, transforms):
        s = np.full(stack.n_slices, np.nan)
        for i in np.flatnonzero(stack.brain_mask):
            try:
                s[i] = ncc(stack.slices[i], simulate_slice(reference, stack, i, ts[i]))
            except SimilarityError:
                s[i] = -1.0
        scores.append(s)
    return scores


def outlier_threshold(scores: np.ndarray) -> float:
    """median - 2·MAD, but never closer than 0.1 to the median."""
    median = float(np.median(scores))
    mad = float(stats.median_abs_deviation(scores, scale=1.0))
    return min(median - MAD_FACTOR * mad, median - MIN_MARGIN)


def reject_outlier_slices(
    stacks: Sequence[SliceStack],
    transforms: Sequence[Sequence[RigidTransform]],
    reference: Volume3D,
    *,
    threshold: float | None = None,
) -> list[np.ndarray]:
    """Per-stack keep masks dropping object slices that disagree with the reference.

    Slices without object content are always kept.

    """
    scores = slice_scores(stacks, transforms, reference)
    pooled = np.concatenate([s[~np.isnan(s)] for s in scores])
    if pooled.size == 0:
        return [np.ones(s.n_slices, dtype=bool) for s in stacks]

    if threshold is None:
        threshold = outlier_threshold(pooled)

    masks = [np.isnan(s) | (s >= threshold) for s in scores]
    n_dropped = sum(int((~m).sum()) for m in masks)
    log.info("Slice rejection: threshold %.3f, %d of %d slices dropped", threshold, n_dropped, pooled.size)
    return masks
