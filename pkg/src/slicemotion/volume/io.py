"""Native volume file format.

A volume is two files side by side:

- ``<name>.raw``: the voxel payload, little-endian IEEE floats, x varying
  fastest, then y, then z (Fortran order of the (nx, ny, nz) array).
- ``<name>.json``: the header,
  ``{"dims": [nx, ny, nz], "spacing_mm": [...], "origin_mm": [...], "datatype": "float32"}``.
  ``datatype`` is ``float32`` (default) or ``float64``.

"""

import logging
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ValidationError

from .errors import MalformedHeaderError, PayloadSizeMismatchError, UnsupportedDatatypeError
from .grid import Grid, PositiveFloat, PositiveInt, Volume3D

log = logging.getLogger(__name__)

DTYPES = {"float32": np.dtype("<f4"), "float64": np.dtype("<f8")}


class VolumeHeader(BaseModel):
    dims: tuple[PositiveInt, PositiveInt, PositiveInt]
    spacing_mm: tuple[PositiveFloat, PositiveFloat, PositiveFloat]
    origin_mm: tuple[float, float, float] = (0.0, 0.0, 0.0)
    datatype: str = "float32"

    @property
    def grid(self) -> Grid:
        return Grid(dims=self.dims, spacing_mm=self.spacing_mm, origin_mm=self.origin_mm)


def header_path(path: Path) -> Path:
    return Path(path).with_suffix(".json")


def save_volume(
    v: Volume3D,
    path: Path,
    *,
    datatype: Literal["float32", "float64"] = "float32",
) -> None:
    path = Path(path)
    header = VolumeHeader(
        dims=v.grid.dims,
        spacing_mm=v.grid.spacing_mm,
        origin_mm=v.grid.origin_mm,
        datatype=datatype,
    )

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.asarray(v.data, dtype=DTYPES[datatype]).tobytes(order="F"))
    header_path(path).write_text(header.model_dump_json(indent=2) + "\n", encoding="utf-8")
    log.debug("Wrote %s volume %s to %s", datatype, v.dims, path)


def load_volume(path: Path) -> Volume3D:
    path = Path(path)
    try:
        header = VolumeHeader.model_validate_json(header_path(path).read_bytes())
    except ValidationError as e:
        raise MalformedHeaderError(f"Malformed header for {path}: {e}") from e

    dtype = DTYPES.get(header.datatype)
    if dtype is None:
        raise UnsupportedDatatypeError(f"Unsupported datatype {header.datatype!r} in {path}")

    payload = path.read_bytes()
    expected = int(np.prod(header.dims)) * dtype.itemsize
    if len(payload) != expected:
        raise PayloadSizeMismatchError(
            f"{path} holds {len(payload)} bytes but the header implies {expected}"
        )

    data = np.frombuffer(payload, dtype=dtype).reshape(header.dims, order="F")
    return Volume3D(data.astype(dtype.newbyteorder("="), copy=True), header.grid)
