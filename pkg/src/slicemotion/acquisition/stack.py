from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Sequence

import numpy as np

from slicemotion.geometry import RigidTransform

from .errors import AcquisitionError, StackTooShortError

_AXES = np.eye(3)


class Orientation(StrEnum):
    AXIAL = "axial"
    CORONAL = "coronal"
    SAGITTAL = "sagittal"

    @property
    def axes(self) -> tuple[int, int, int]:
        """World axis indices of the (u, v, normal) slice directions."""
        return {
            Orientation.AXIAL: (0, 1, 2),
            Orientation.CORONAL: (0, 2, 1),
            Orientation.SAGITTAL: (1, 2, 0),
        }[self]

    @property
    def u(self) -> np.ndarray:
        return _AXES[self.axes[0]]

    @property
    def v(self) -> np.ndarray:
        return _AXES[self.axes[1]]

    @property
    def normal(self) -> np.ndarray:
        return _AXES[self.axes[2]]

    @property
    def index(self) -> int:
        return list(Orientation).index(self)


def interleaved_order(n: int) -> np.ndarray:
    """Acquisition order [0, 2, 4, ..., 1, 3, 5, ...] of n slices."""
    return np.concatenate([np.arange(0, n, 2), np.arange(1, n, 2)])


def slice_positions(n_slices: int, thickness_mm: float) -> np.ndarray:
    return (np.arange(n_slices) - (n_slices - 1) / 2) * thickness_mm


def in_plane_points(
    orientation: Orientation,
    position_mm: float,
    center_mm,
    shape: tuple[int, int],
    spacing_mm: tuple[float, float],
) -> np.ndarray:
    """Nominal world coordinates (nu, nv, 3) of the pixel centers of one slice."""
    nu, nv = shape
    a = (np.arange(nu) - (nu - 1) / 2) * spacing_mm[0]
    b = (np.arange(nv) - (nv - 1) / 2) * spacing_mm[1]
    return (
        np.asarray(center_mm, dtype=float)
        + a[:, None, None] * orientation.u
        + b[None, :, None] * orientation.v
        + position_mm * orientation.normal
    )


def psf_quadrature(sigma_mm: float, n_points: int = 7, extent: float = 2.5):
    """Offsets along the slice normal and their normalized Gaussian weights."""
    t = np.linspace(-extent * sigma_mm, extent * sigma_mm, n_points)
    w = np.exp(-0.5 * np.linspace(-extent, extent, n_points) ** 2)
    return t, w / w.sum()


def _identity_list(n: int, center) -> list[RigidTransform]:
    return [RigidTransform.identity(center) for _ in range(n)]


@dataclass(frozen=True, eq=False)
class SliceStack:
    """An ordered stack of 2D slices of one orientation.

    Slices are indexed by spatial position along the normal. Slice i sits at
    ``center_mm + positions_mm[i] * normal`` before motion, and its transform
    maps that nominal plane into the frame of the imaged volume.
    ``acquisition_order[t]`` is the slice acquired at time step t.

    """

    slices: np.ndarray
    orientation: Orientation
    slice_thickness_mm: float
    in_plane_spacing_mm: tuple[float, float]
    positions_mm: np.ndarray
    psf_sigma_mm: float
    center_mm: np.ndarray = field(default_factory=lambda: np.zeros(3))
    true_transforms: list[RigidTransform] | None = None
    est_transforms: list[RigidTransform] = field(default_factory=list)
    brain_mask: np.ndarray | None = None
    acquisition_order: np.ndarray | None = None
    slice_times_s: np.ndarray | None = None

    def __post_init__(self) -> None:
        slices = np.asarray(self.slices, dtype=float)
        if slices.ndim != 3:
            raise AcquisitionError(f"Expected slices of shape (N, nu, nv), got {slices.shape}")
        n = slices.shape[0]

        self._set("slices", slices)
        self._set("orientation", Orientation(self.orientation))
        self._set("positions_mm", np.asarray(self.positions_mm, dtype=float))
        self._set("center_mm", np.asarray(self.center_mm, dtype=float).reshape(3))
        self._set("in_plane_spacing_mm", tuple(float(s) for s in self.in_plane_spacing_mm))

        if not self.est_transforms:
            self._set("est_transforms", _identity_list(n, self.center_mm))
        else:
            self._set("est_transforms", list(self.est_transforms))
        if self.true_transforms is not None:
            self._set("true_transforms", list(self.true_transforms))

        if self.brain_mask is None:
            self._set("brain_mask", np.ones(n, dtype=bool))
        else:
            self._set("brain_mask", np.asarray(self.brain_mask, dtype=bool))

        if self.acquisition_order is None:
            self._set("acquisition_order", np.arange(n))
        else:
            self._set("acquisition_order", np.asarray(self.acquisition_order, dtype=int))

        if self.slice_times_s is None:
            times = np.empty(n)
            times[self.acquisition_order] = np.arange(n, dtype=float)
            self._set("slice_times_s", times)
        else:
            self._set("slice_times_s", np.asarray(self.slice_times_s, dtype=float))

        self._validate()

    def _set(self, name: str, value) -> None:
        object.__setattr__(self, name, value)

    def _validate(self) -> None:
        n = self.n_slices
        lengths = {
            "positions_mm": len(self.positions_mm),
            "est_transforms": len(self.est_transforms),
            "brain_mask": len(self.brain_mask),
            "slice_times_s": len(self.slice_times_s),
        }
        if self.true_transforms is not None:
            lengths["true_transforms"] = len(self.true_transforms)

        for name, length in lengths.items():
            if length != n:
                raise AcquisitionError(f"{name} has {length} entries for {n} slices")

        if sorted(self.acquisition_order.tolist()) != list(range(n)):
            raise AcquisitionError(
                f"acquisition_order {self.acquisition_order.tolist()} is not a permutation"
            )
        if self.slice_thickness_mm <= 0 or self.psf_sigma_mm <= 0:
            raise AcquisitionError("Slice thickness and PSF width must be positive")

    @property
    def n_slices(self) -> int:
        return self.slices.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.slices.shape[1], self.slices.shape[2]

    def pixel_points(self, index: int) -> np.ndarray:
        return in_plane_points(
            self.orientation,
            self.positions_mm[index],
            self.center_mm,
            self.shape,
            self.in_plane_spacing_mm,
        )

    def replace(self, **changes) -> SliceStack:
        return dataclasses.replace(self, **changes)

    def with_estimates(self, transforms: Sequence[RigidTransform]) -> SliceStack:
        return self.replace(est_transforms=list(transforms))

    def subset(self, indices: Sequence[int]) -> SliceStack:
        """A stack made of the given slices; acquisition order follows their times."""
        indices = list(indices)
        times = self.slice_times_s[indices]
        return SliceStack(
            slices=self.slices[indices],
            orientation=self.orientation,
            slice_thickness_mm=self.slice_thickness_mm,
            in_plane_spacing_mm=self.in_plane_spacing_mm,
            positions_mm=self.positions_mm[indices],
            psf_sigma_mm=self.psf_sigma_mm,
            center_mm=self.center_mm,
            true_transforms=(
                None
                if self.true_transforms is None
                else [self.true_transforms[i] for i in indices]
            ),
            est_transforms=[self.est_transforms[i] for i in indices],
            brain_mask=self.brain_mask[indices],
            acquisition_order=np.argsort(times, kind="stable"),
            slice_times_s=times,
        )


def deinterleave(stack: SliceStack) -> tuple[SliceStack, SliceStack]:
    """Split a stack into its even- and odd-indexed slices.

    Each half keeps its slices' positions, so the gap between neighbouring
    slices doubles, and orders them by acquisition time.

    """
    if stack.n_slices < 2:
        raise StackTooShortError()

    n = stack.n_slices
    return stack.subset(range(0, n, 2)), stack.subset(range(1, n, 2))


def interleave(a: SliceStack, b: SliceStack) -> SliceStack:
    """Merge two sub-stacks back into one ordered by slice position."""
    if a.orientation != b.orientation or a.shape != b.shape:
        raise AcquisitionError("Only stacks of the same orientation and shape can be merged")

    order = np.argsort(np.concatenate([a.positions_mm, b.positions_mm]), kind="stable")
    times = np.concatenate([a.slice_times_s, b.slice_times_s])[order]

    true = None
    if a.true_transforms is not None and b.true_transforms is not None:
        merged = a.true_transforms + b.true_transforms
        true = [merged[i] for i in order]

    est = a.est_transforms + b.est_transforms
    return SliceStack(
        slices=np.concatenate([a.slices, b.slices])[order],
        orientation=a.orientation,
        slice_thickness_mm=a.slice_thickness_mm,
        in_plane_spacing_mm=a.in_plane_spacing_mm,
        positions_mm=np.concatenate([a.positions_mm, b.positions_mm])[order],
        psf_sigma_mm=a.psf_sigma_mm,
        center_mm=a.center_mm,
        true_transforms=true,
        est_transforms=[est[i] for i in order],
        brain_mask=np.concatenate([a.brain_mask, b.brain_mask])[order],
        acquisition_order=np.argsort(times, kind="stable"),
        slice_times_s=times,
    )
