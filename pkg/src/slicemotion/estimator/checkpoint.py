"""Single-file parameter checkpoints.

Layout: an 8-byte little-endian manifest length, the JSON manifest, then every
array back to back as little-endian float64 in C order. The manifest records
each array's name, shape and offset, the network config and an optional
JSON-safe training state.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from .errors import CheckpointError
from .model import EstimatorConfig, EstimatorParams

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
_LENGTH = struct.Struct("<Q")
_DTYPE = np.dtype("<f8")


class ArrayEntry(BaseModel):
    name: str
    shape: tuple[int, ...]
    offset: int = Field(ge=0)
    """Offset into the payload, in elements."""

    @property
    def size(self) -> int:
        return math.prod(self.shape)


class CheckpointManifest(BaseModel):
    version: int = FORMAT_VERSION
    config: EstimatorConfig
    arrays: list[ArrayEntry]
    state: dict[str, Any] = Field(default_factory=dict)


@dataclass
class Checkpoint:
    params: EstimatorParams
    extra: dict[str, np.ndarray] = field(default_factory=dict)
    """Arrays stored beside the weights, e.g. optimizer caches."""
    state: dict[str, Any] = field(default_factory=dict)


WEIGHT_PREFIX = "weight."
BUFFER_PREFIX = "buffer."
EXTRA_PREFIX = "extra."


def dump_checkpoint(checkpoint: Checkpoint) -> bytes:
    named: dict[str, np.ndarray] = {}
    named |= {WEIGHT_PREFIX + k: v for k, v in checkpoint.params.weights.items()}
    named |= {BUFFER_PREFIX + k: v for k, v in checkpoint.params.buffers().items()}
    named |= {EXTRA_PREFIX + k: v for k, v in checkpoint.extra.items()}

    entries = []
    chunks = []
    offset = 0
    for name, array in named.items():
        array = np.ascontiguousarray(array, dtype=_DTYPE)
        entries.append(ArrayEntry(name=name, shape=array.shape, offset=offset))
        chunks.append(array.tobytes())
        offset += array.size

    manifest = CheckpointManifest(
        config=checkpoint.params.config,
        arrays=entries,
        state=checkpoint.state,
    )
    header = manifest.model_dump_json().encode()
    return _LENGTH.pack(len(header)) + header + b"".join(chunks)


def parse_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < _LENGTH.size:
        raise CheckpointError("Checkpoint is truncated before its manifest")

    (length,) = _LENGTH.unpack_from(data)
    header = data[_LENGTH.size : _LENGTH.size + length]
    if len(header) != length:
        raise CheckpointError("Checkpoint is truncated inside its manifest")

    try:
        manifest = CheckpointManifest.model_validate_json(header)
    except ValidationError as e:
        raise CheckpointError(f"Malformed checkpoint manifest: {e}") from e
    if manifest.version != FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {manifest.version}")

    payload = np.frombuffer(data, dtype=_DTYPE, offset=_LENGTH.size + length)
    expected = sum(e.size for e in manifest.arrays)
    if payload.size != expected:
        raise CheckpointError(
            f"Checkpoint payload holds {payload.size} values, manifest expects {expected}"
        )

    weights: dict[str, np.ndarray] = {}
    buffers: dict[str, np.ndarray] = {}
    extra: dict[str, np.ndarray] = {}
    for entry in manifest.arrays:
        array = payload[entry.offset : entry.offset + entry.size].reshape(entry.shape).copy()
        for prefix, target in (
            (WEIGHT_PREFIX, weights),
            (BUFFER_PREFIX, buffers),
            (EXTRA_PREFIX, extra),
        ):
            if entry.name.startswith(prefix):
                target[entry.name.removeprefix(prefix)] = array
                break
        else:
            raise CheckpointError(f"Unknown array {entry.name!r} in checkpoint")

    params = _restore_params(manifest.config, weights, buffers)
    return Checkpoint(params, extra, manifest.state)


def _restore_params(
    config: EstimatorConfig,
    weights: Mapping[str, np.ndarray],
    buffers: Mapping[str, np.ndarray],
) -> EstimatorParams:
    template = EstimatorParams.initialize(config)
    missing = template.weights.keys() - weights.keys()
    if missing:
        raise CheckpointError(f"Checkpoint is missing weights: {', '.join(sorted(missing))}")

    for name, array in template.weights.items():
        if weights[name].shape != array.shape:
            raise CheckpointError(
                f"Weight {name!r} has shape {weights[name].shape}, expected {array.shape}"
            )

    params = EstimatorParams(config, {k: weights[k] for k in template.weights}, template.norm_states)
    try:
        params.load_buffers(buffers)
    except KeyError as e:
        raise CheckpointError(f"Checkpoint is missing buffer {e.args[0]!r}") from e
    return params


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dump_checkpoint(checkpoint))
    log.info("Saved checkpoint with %d parameters to %s", checkpoint.params.n_parameters, path)


def load_checkpoint(path: Path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError as e:
        raise CheckpointError(f"No checkpoint at {path}") from e
    return parse_checkpoint(data)
