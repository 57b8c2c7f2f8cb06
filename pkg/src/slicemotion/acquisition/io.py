"""Slice stack directories.

A stack is a directory holding ``manifest.json`` plus one raw file per slice,
``slice_000.raw``, ``slice_001.raw``, ..., each a little-endian float32 image
with u varying fastest.
"""

import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ValidationError

from slicemotion.geometry import RigidTransform, TransformRecord

from .errors import StackFormatError
from .stack import Orientation, SliceStack

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
PAYLOAD_DTYPE = np.dtype("<f4")


class StackManifest(BaseModel):
    orientation: Orientation
    slice_shape: tuple[int, int]
    slice_thickness_mm: float
    in_plane_spacing_mm: tuple[float, float]
    psf_sigma_mm: float
    center_mm: tuple[float, float, float]
    positions_mm: list[float]
    slice_times_s: list[float]
    acquisition_order: list[int]
    brain_mask: list[bool]
    files: list[str]
    est_transforms: list[TransformRecord]
    true_transforms: list[TransformRecord] | None = None


def slice_file_name(index: int) -> str:
    return f"slice_{index:03d}.raw"


def save_stack(stack: SliceStack, directory: Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    files = []
    for i, image in enumerate(stack.slices):
        name = slice_file_name(i)
        (directory / name).write_bytes(
            np.asarray(image, dtype=PAYLOAD_DTYPE).tobytes(order="F")
        )
        files.append(name)

    manifest = StackManifest(
        orientation=stack.orientation,
        slice_shape=stack.shape,
        slice_thickness_mm=stack.slice_thickness_mm,
        in_plane_spacing_mm=stack.in_plane_spacing_mm,
        psf_sigma_mm=stack.psf_sigma_mm,
        center_mm=tuple(float(x) for x in stack.center_mm),
        positions_mm=stack.positions_mm.tolist(),
        slice_times_s=stack.slice_times_s.tolist(),
        acquisition_order=stack.acquisition_order.tolist(),
        brain_mask=stack.brain_mask.tolist(),
        files=files,
        est_transforms=[T.to_record() for T in stack.est_transforms],
        true_transforms=(
            None
            if stack.true_transforms is None
            else [T.to_record() for T in stack.true_transforms]
        ),
    )
    (directory / MANIFEST_NAME).write_text(
        manifest.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )
    log.debug("Wrote %s stack of %d slices to %s", stack.orientation, stack.n_slices, directory)


def load_stack(directory: Path) -> SliceStack:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise StackFormatError(f"No {MANIFEST_NAME} found in {directory}")

    try:
        manifest = StackManifest.model_validate_json(manifest_path.read_bytes())
    except ValidationError as e:
        raise StackFormatError(f"Malformed stack manifest {manifest_path}: {e}") from e

    expected = int(np.prod(manifest.slice_shape)) * PAYLOAD_DTYPE.itemsize
    slices = []
    for name in manifest.files:
        path = directory / name
        if not path.is_file():
            raise StackFormatError(f"Missing slice file {path}")
        payload = path.read_bytes()
        if len(payload) != expected:
            raise StackFormatError(f"{path} holds {len(payload)} bytes, expected {expected}")
        image = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).reshape(manifest.slice_shape, order="F")
        slices.append(image.astype(np.float64))

    if not slices:
        raise StackFormatError(f"Stack {directory} lists no slices")

    return SliceStack(
        slices=np.stack(slices),
        orientation=manifest.orientation,
        slice_thickness_mm=manifest.slice_thickness_mm,
        in_plane_spacing_mm=manifest.in_plane_spacing_mm,
        positions_mm=manifest.positions_mm,
        psf_sigma_mm=manifest.psf_sigma_mm,
        center_mm=manifest.center_mm,
        true_transforms=(
            None
            if manifest.true_transforms is None
            else [RigidTransform.from_record(r) for r in manifest.true_transforms]
        ),
        est_transforms=[RigidTransform.from_record(r) for r in manifest.est_transforms],
        brain_mask=manifest.brain_mask,
        acquisition_order=manifest.acquisition_order,
        slice_times_s=manifest.slice_times_s,
    )
