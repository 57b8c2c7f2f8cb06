"""Natural cubic smoothing splines.

Fits g minimizing ``Σ (y_i - g(x_i))² + λ ∫ g''(x)² dx``. The minimizer is the
natural cubic interpolant of its own fitted values, which solve
``(I + λ Q R⁻¹ Qᵀ) g = y`` with Q the (n, n-2) second-difference matrix and R
the (n-2, n-2) tridiagonal band of interval lengths.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize
from scipy.interpolate import CubicSpline

from .errors import DuplicateAbscissaError, SplineError, TooFewPointsError

log = logging.getLogger(__name__)

GCV_LOG10_SPAN = 6.0


def _penalty_matrix(x: np.ndarray) -> np.ndarray:
    """K = Q R⁻¹ Qᵀ, the roughness penalty on fitted values."""
    n = len(x)
    if n < 3:
        return np.zeros((n, n))

    h = np.diff(x)
    Q = np.zeros((n, n - 2))
    R = np.zeros((n - 2, n - 2))
    for j in range(n - 2):
        Q[j, j] = 1 / h[j]
        Q[j + 1, j] = -1 / h[j] - 1 / h[j + 1]
        Q[j + 2, j] = 1 / h[j + 1]
        R[j, j] = (h[j] + h[j + 1]) / 3
        if j + 1 < n - 2:
            R[j, j + 1] = R[j + 1, j] = h[j + 1] / 6

    return Q @ linalg.solve(R, Q.T, assume_a="pos")


def _smoother(K: np.ndarray, smoothing: float) -> np.ndarray:
    return linalg.inv(np.eye(len(K)) + smoothing * K)


def gcv_score(K: np.ndarray, y: np.ndarray, smoothing: float) -> float:
    n = len(y)
    A = _smoother(K, smoothing)
    residual = y - A @ y
    denom = (n - np.trace(A)) ** 2
    if denom <= 0:
        return math.inf
    return float(n * residual @ residual / denom)


def select_smoothing(x: np.ndarray, y: np.ndarray) -> float:
    """Choose λ by generalized cross-validation over a log-scaled bracket."""
    if len(x) < 4 or np.ptp(y) == 0:
        return 0.0

    K = _penalty_matrix(x)
    scale = math.log10(float(np.mean(np.diff(x))) ** 3)
    result = optimize.minimize_scalar(
        lambda e: gcv_score(K, y, 10.0**e),
        bounds=(scale - GCV_LOG10_SPAN, scale + GCV_LOG10_SPAN),
        method="bounded",
    )
    return float(10.0**result.x)


@dataclass(frozen=True)
class SmoothingSpline:
    curve: CubicSpline
    smoothing: float
    fitted: np.ndarray

    def __call__(self, x, nu: int = 0) -> np.ndarray:
        return self.curve(x, nu)

    def derivative(self, x, nu: int = 1) -> np.ndarray:
        return self.curve(x, nu)


def fit_smoothing_spline(xs, ys, smoothing: float | None = None) -> SmoothingSpline:
    """Fit a natural cubic smoothing spline; smoothing=None selects λ by GCV.

    smoothing=0 interpolates the points; large smoothing tends to the
    least-squares line.

    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.ndim != 1 or len(x) != len(y):
        raise SplineError("xs and ys must be 1D arrays of equal length")
    if len(x) < 2:
        raise TooFewPointsError()
    if np.any(np.diff(x) <= 0):
        raise DuplicateAbscissaError()

    if smoothing is None:
        smoothing = select_smoothing(x, y)
    if smoothing < 0:
        raise SplineError("Smoothing must be non-negative")

    if smoothing == 0 or len(x) < 3:
        fitted = y.copy()
    else:
        fitted = linalg.solve(np.eye(len(x)) + smoothing * _penalty_matrix(x), y)

    log.debug("Fitted smoothing spline to %d points, smoothing=%.4g", len(x), smoothing)
    return SmoothingSpline(CubicSpline(x, fitted, bc_type="natural"), smoothing, fitted)
