from __future__ import annotations

import logging
from typing import Callable

import numpy as np
from scipy.optimize import OptimizeResult

log = logging.getLogger(__name__)


def coordinate_search(
    func: Callable[[np.ndarray], float],
    x0,
    steps,
    *,
    lower=None,
    upper=None,
    max_evals: int = 300,
    tol: float = 1e-3,
    shrink: float = 0.5,
) -> OptimizeResult:
    """Maximize func by derivative-free compass search with shrinking steps.

    Each coordinate is probed at ±step; improving moves are accepted
    immediately. When a full sweep finds no improvement every step shrinks.
    Search stops once all steps fall below tol times their initial value, or
    after max_evals evaluations. ``history`` holds the objective after each
    accepted move and is non-decreasing.

    """
    x = np.asarray(x0, dtype=float).copy()
    steps = np.asarray(steps, dtype=float).copy()
    initial_steps = steps.copy()
    lower = np.full_like(x, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full_like(x, np.inf) if upper is None else np.asarray(upper, dtype=float)
    x = np.clip(x, lower, upper)

    best = float(func(x))
    n_evals = 1
    history = [best]

    while n_evals < max_evals:
        improved = False
        for k in range(len(x)):
            for sign in (1.0, -1.0):
                if n_evals >= max_evals:
                    break

                candidate = x.copy()
                candidate[k] = np.clip(candidate[k] + sign * steps[k], lower[k], upper[k])
                if candidate[k] == x[k]:
                    continue

                value = float(func(candidate))
                n_evals += 1
                if value > best:
                    x, best = candidate, value
                    history.append(best)
                    improved = True
                    break

        if not improved:
            steps *= shrink
            if np.all(steps < tol * initial_steps):
                break

    log.debug("Coordinate search: %d evals, %d accepted moves, best %.6f", n_evals, len(history) - 1, best)
    return OptimizeResult(
        x=x,
        fun=best,
        nfev=n_evals,
        history=np.array(history),
        success=bool(np.all(steps < tol * initial_steps)),
    )
