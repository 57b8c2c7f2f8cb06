"""Rotation algebra on SO(3).

Euler convention: extrinsic x-y-z, i.e. ``R = Rz(θz) @ Ry(θy) @ Rx(θx)``.
Angles are radians throughout.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import GeometryError

ORTHONORMAL_TOL = 1e-6
GIMBAL_EPSILON = 1e-9


def _rx(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _drx(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def _dry(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def _drz(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def euler_to_matrix(theta) -> np.ndarray:
    tx, ty, tz = (float(t) for t in np.asarray(theta, dtype=float).reshape(3))
    return _rz(tz) @ _ry(ty) @ _rx(tx)


def euler_jacobian(theta) -> np.ndarray:
    """Return dR/dθ as an array of shape (3, 3, 3), indexed [k, i, j]."""
    tx, ty, tz = (float(t) for t in np.asarray(theta, dtype=float).reshape(3))
    rx, ry, rz = _rx(tx), _ry(ty), _rz(tz)
    return np.stack(
        [
            rz @ ry @ _drx(tx),
            rz @ _dry(ty) @ rx,
            _drz(tz) @ ry @ rx,
        ]
    )


def matrix_to_euler(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    cy = math.hypot(R[0, 0], R[1, 0])
    ty = math.atan2(-R[2, 0], cy)

    if cy > GIMBAL_EPSILON:
        tx = math.atan2(R[2, 1], R[2, 2])
        tz = math.atan2(R[1, 0], R[0, 0])
    else:
        # θz and θx are coupled at |θy| = π/2; fold everything into θx
        tz = 0.0
        tx = math.atan2(-R[1, 2], R[1, 1])

    return np.array([tx, ty, tz])


def is_rotation(R: np.ndarray, tol: float = ORTHONORMAL_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol:
        return False
    return abs(np.linalg.det(R) - 1.0) <= tol


def check_rotation(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if not is_rotation(R):
        raise GeometryError()
    return R


def skew(v) -> np.ndarray:
    x, y, z = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def matrix_to_quaternion(R: np.ndarray) -> np.ndarray:
    """Return the unit quaternion (w, x, y, z) with w >= 0 (Shepperd's method)."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]

    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]

    q = np.array(q)
    q /= np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


def rotation_vector(R: np.ndarray) -> np.ndarray:
    """Axis-angle vector of R, angle in [0, π]."""
    w, x, y, z = matrix_to_quaternion(R)
    v = np.array([x, y, z])
    s = float(np.linalg.norm(v))
    if s < 1e-15:
        return 2.0 * v / w

    angle = 2.0 * math.atan2(s, w)
    return v * (angle / s)


def rotation_angle(R: np.ndarray) -> float:
    return float(np.linalg.norm(rotation_vector(R)))


def matrix_log_rotation(R: np.ndarray) -> np.ndarray:
    """Principal matrix logarithm of a rotation, as a 3×3 skew matrix.

    Near an angle of π the axis is taken from the quaternion, which stays
    well conditioned where the (R - Rᵀ) / (2 sin θ) formula does not.

    """
    R = check_rotation(R)
    return skew(rotation_vector(R))


def rotation_exp(S: np.ndarray) -> np.ndarray:
    """Rodrigues' formula; inverse of matrix_log_rotation."""
    omega = vee(S)
    theta = float(np.linalg.norm(omega))
    if theta < 1e-12:
        return np.eye(3) + skew(omega)

    K = skew(omega / theta)
    return np.eye(3) + math.sin(theta) * K + (1.0 - math.cos(theta)) * (K @ K)
