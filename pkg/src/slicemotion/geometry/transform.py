from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Self, Sequence

import numpy as np
from pydantic import BaseModel, Field, TypeAdapter

from .rotation import euler_to_matrix, matrix_to_euler

Vector3 = tuple[float, float, float]


def _vec3(value) -> np.ndarray:
    arr = np.array(value, dtype=float).reshape(3)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """A rigid motion x' = R(θ)·(x - center) + center + d.

    theta is in radians (extrinsic x-y-z Euler), d and center in mm.

    """

    theta: np.ndarray = field(default_factory=lambda: _vec3((0, 0, 0)))
    d: np.ndarray = field(default_factory=lambda: _vec3((0, 0, 0)))
    center: np.ndarray = field(default_factory=lambda: _vec3((0, 0, 0)))

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", _vec3(self.theta))
        object.__setattr__(self, "d", _vec3(self.d))
        object.__setattr__(self, "center", _vec3(self.center))

    @classmethod
    def identity(cls, center=(0.0, 0.0, 0.0)) -> Self:
        return cls(center=center)

    @classmethod
    def from_matrix(cls, M: np.ndarray, center=(0.0, 0.0, 0.0)) -> Self:
        M = np.asarray(M, dtype=float)
        R = M[:3, :3]
        t = M[:3, 3]
        c = np.asarray(center, dtype=float)
        return cls(theta=matrix_to_euler(R), d=t - c + R @ c, center=c)

    @cached_property
    def rotation(self) -> np.ndarray:
        return euler_to_matrix(self.theta)

    @cached_property
    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.center + self.d - self.rotation @ self.center
        return M

    @property
    def params(self) -> np.ndarray:
        """The six parameters (θx, θy, θz, dx, dy, dz)."""
        return np.concatenate([self.theta, self.d])

    def with_params(self, params) -> RigidTransform:
        params = np.asarray(params, dtype=float)
        return RigidTransform(theta=params[:3], d=params[3:], center=self.center)

    def with_center(self, center) -> RigidTransform:
        """Same motion expressed about a different rotation center."""
        return RigidTransform.from_matrix(self.matrix, center=center)

    def apply(self, points) -> np.ndarray:
        return apply_to_point(self, points)

    def is_identity(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, np.eye(4), atol=atol))

    def to_record(self) -> TransformRecord:
        return TransformRecord(
            theta_deg=tuple(float(math.degrees(t)) for t in self.theta),
            d_mm=tuple(float(x) for x in self.d),
            center_mm=tuple(float(x) for x in self.center),
        )

    @classmethod
    def from_record(cls, record: TransformRecord) -> Self:
        return cls(
            theta=np.radians(record.theta_deg),
            d=record.d_mm,
            center=record.center_mm,
        )

    def __repr__(self) -> str:
        theta = ", ".join(f"{math.degrees(t):.3f}" for t in self.theta)
        d = ", ".join(f"{x:.3f}" for x in self.d)
        return f"RigidTransform(theta_deg=({theta}), d_mm=({d}))"


class TransformRecord(BaseModel, frozen=True):
    theta_deg: Vector3
    d_mm: Vector3
    center_mm: Vector3 = Field(default=(0.0, 0.0, 0.0))


transform_list_adapter = TypeAdapter(list[TransformRecord])


def compose(A: RigidTransform, B: RigidTransform) -> RigidTransform:
    """Return the transform applying B first, then A; expressed about A's center."""
    return RigidTransform.from_matrix(A.matrix @ B.matrix, center=A.center)


def invert(T: RigidTransform) -> RigidTransform:
    R = T.rotation
    return RigidTransform(theta=matrix_to_euler(R.T), d=-R.T @ T.d, center=T.center)


def apply_to_point(T: RigidTransform, points) -> np.ndarray:
    """Apply T to one point or an array of points with trailing dimension 3."""
    p = np.asarray(points, dtype=float)
    return (p - T.center) @ T.rotation.T + T.center + T.d


def dump_transforms(transforms: Sequence[RigidTransform]) -> bytes:
    return transform_list_adapter.dump_json(
        [T.to_record() for T in transforms], indent=2
    )


def load_transforms(data: str | bytes) -> list[RigidTransform]:
    return [RigidTransform.from_record(r) for r in transform_list_adapter.validate_json(data)]
