import numpy as np

from .errors import RegistrationError, SimilarityError


def _masked(a, b, mask) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise RegistrationError(f"Shape mismatch: {a.shape} vs {b.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        return a[mask], b[mask]
    return a.ravel(), b.ravel()


def ncc(a, b, mask=None) -> float:
    """Pearson correlation of the (masked) intensities, in [-1, 1]."""
    a, b = _masked(a, b, mask)
    if a.size < 2:
        raise SimilarityError("At least two unmasked elements are required")

    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if denom <= 1e-12 * max(a.size, 1):
        raise SimilarityError()
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))


def mse(a, b, mask=None) -> float:
    a, b = _masked(a, b, mask)
    if a.size == 0:
        raise SimilarityError("No unmasked elements")
    return float(np.mean((a - b) ** 2))


def similarity(a, b, mask=None, *, metric: str = "ncc") -> float:
    """Higher-is-better similarity; MSE is negated."""
    if metric == "ncc":
        return ncc(a, b, mask)
    return -mse(a, b, mask)
