from __future__ import annotations

import numpy as np
from pydantic import BaseModel
from scipy import stats

from .errors import MetricError


class PairedComparison(BaseModel):
    n: int
    mean_difference: float
    """Mean of a - b."""
    t_statistic: float
    p_value: float
    p_corrected: float
    """Bonferroni-corrected p-value, capped at 1."""
    significant: bool


def paired_comparison(
    a,
    b,
    n_comparisons: int = 1,
    *,
    alpha: float = 0.05,
) -> PairedComparison:
    """Paired t-test of two ablation variants scored on the same cases."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise MetricError(f"Paired samples must be 1D and equal length, got {a.shape} and {b.shape}")
    if a.size < 2:
        raise MetricError("A paired comparison needs at least two cases")
    if n_comparisons < 1:
        raise MetricError("n_comparisons must be at least 1")

    result = stats.ttest_rel(a, b)
    p = float(result.pvalue)
    corrected = min(1.0, p * n_comparisons)
    return PairedComparison(
        n=int(a.size),
        mean_difference=float(np.mean(a - b)),
        t_statistic=float(result.statistic),
        p_value=p,
        p_corrected=corrected,
        significant=corrected < alpha,
    )
