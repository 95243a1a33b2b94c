"""Versioned little-endian binary serialization of model collections.

Layout (all multi-byte integers little-endian; the full byte-offset
table lives in docs/model-file-format.md):

    offset  size  field
    0       4     magic "DRSN"
    4       1     format version (1)
    5       1     quantized flag (0 or 1)
    6       4     input length D       (u32)
    10      4     activation count K   (u32)
    14      4     place count P        (u32)
    18      4     model count n        (u32)
    22      4     voting radius r      (u32)
    26      8     master seed          (u64)
    34      -     n model records

Each model record holds the seed (u64), the projection as per-column
bitsets (ceil(D/8) bytes per column, K columns, LSB-first within each
byte), then the weight payload: scale (f32) followed by the K*P int8
grid when quantized, else the K*P float32 grid; grids are row-major.
The projection is stored explicitly, not regenerated from the seed, so
files outlive RNG implementation changes.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .model import DrosoNet, ProjectionMatrix, QuantizedWeights
from .seeds import MASK64
from .voting import Ensemble

MAGIC = b"DRSN"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sBBIIIIIQ")
_SEED = struct.Struct("<Q")
_SCALE = struct.Struct("<f")


class ModelFileError(Exception):
    """A model file could not be parsed; the message names the byte offset."""


def _pack_projection(projection: ProjectionMatrix) -> bytes:
    dense = projection.dense()  # (D, K)
    return np.packbits(dense.T, axis=1, bitorder="little").tobytes()


def _serialize(ensemble: Ensemble) -> bytes:
    first = ensemble.models[0]
    quantized = first.quantized
    for i, model in enumerate(ensemble.models):
        if model.quantized != quantized:
            raise ValueError(f"model {i} mixes float and quantized weights in one file")
    chunks = [
        _HEADER.pack(
            MAGIC,
            FORMAT_VERSION,
            int(quantized),
            first.projection.input_dim,
            first.n_activations,
            first.place_count,
            ensemble.n_models,
            ensemble.radius,
            ensemble.master_seed & MASK64,
        )
    ]
    for model in ensemble.models:
        chunks.append(_SEED.pack(model.seed & MASK64))
        chunks.append(_pack_projection(model.projection))
        if quantized:
            chunks.append(_SCALE.pack(model.weights.scale))
            chunks.append(model.weights.q.tobytes())
        else:
            chunks.append(np.ascontiguousarray(model.weights, dtype="<f4").tobytes())
    return b"".join(chunks)


def save(ensemble: Ensemble, path) -> int:
    """Serialize an ensemble; atomic (temp file + rename). Returns bytes written."""
    data = _serialize(ensemble)
    target = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=target.parent or Path("."), suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, target)
        except BaseException:
            os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(f"cannot write model file {target}: {exc}") from exc
    return len(data)


def _take(data: bytes, offset: int, size: int, path, what: str) -> tuple[bytes, int]:
    if offset + size > len(data):
        raise ModelFileError(
            f"{path}: truncated {what} at offset {offset} "
            f"(need {size} bytes, {len(data) - offset} left)"
        )
    return data[offset : offset + size], offset + size


def _unpack_projection(raw: bytes, input_dim: int, n_act: int, path, offset: int) -> ProjectionMatrix:
    col_bytes = (input_dim + 7) // 8
    packed = np.frombuffer(raw, dtype=np.uint8).reshape(n_act, col_bytes)
    bits = np.unpackbits(packed, axis=1, bitorder="little")[:, :input_dim]
    counts = bits.sum(axis=1)
    if counts.min() < 1 or counts.min() != counts.max():
        raise ModelFileError(
            f"{path}: projection at offset {offset} is not column-exact "
            f"(popcounts range {counts.min()}..{counts.max()})"
        )
    rows = np.empty((int(counts[0]), n_act), dtype=np.int32)
    for k in range(n_act):
        rows[:, k] = np.flatnonzero(bits[k])
    rows.setflags(write=False)
    return ProjectionMatrix(input_dim=input_dim, rows=rows)


def load(path) -> Ensemble:
    """Parse a model file back into an ensemble; strict about sizes and version."""
    target = Path(path)
    try:
        data = target.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read model file {target}: {exc}") from exc

    if len(data) < _HEADER.size:
        raise ModelFileError(
            f"{target}: truncated header at offset 0 "
            f"(file is {len(data)} bytes, need {_HEADER.size})"
        )
    magic, version, quantized, input_dim, n_act, places, n_models, radius, master_seed = (
        _HEADER.unpack_from(data, 0)
    )
    if magic != MAGIC:
        raise ModelFileError(f"{target}: bad magic {magic!r} at offset 0")
    if version != FORMAT_VERSION:
        raise ModelFileError(f"{target}: unsupported format version {version} at offset 4")
    if quantized not in (0, 1):
        raise ModelFileError(f"{target}: invalid quantized flag {quantized} at offset 5")
    if input_dim < 1 or n_act < 1 or places < 2 or n_models < 1:
        raise ModelFileError(
            f"{target}: implausible header (D={input_dim} K={n_act} "
            f"P={places} n={n_models}) at offset 6"
        )

    col_bytes = (input_dim + 7) // 8
    offset = _HEADER.size
    models = []
    for i in range(n_models):
        raw, offset = _take(data, offset, _SEED.size, target, f"seed of model {i}")
        (seed,) = _SEED.unpack(raw)
        block_offset = offset
        raw, offset = _take(
            data, offset, col_bytes * n_act, target, f"projection of model {i}"
        )
        projection = _unpack_projection(raw, input_dim, n_act, target, block_offset)
        if quantized:
            raw, offset = _take(data, offset, _SCALE.size, target, f"scale of model {i}")
            (scale,) = _SCALE.unpack(raw)
            if not np.isfinite(scale) or scale <= 0.0:
                raise ModelFileError(
                    f"{target}: invalid quantization scale {scale} at offset {offset - 4}"
                )
            raw, offset = _take(
                data, offset, n_act * places, target, f"weights of model {i}"
            )
            grid = np.frombuffer(raw, dtype=np.int8).reshape(n_act, places).copy()
            grid.setflags(write=False)
            weights = QuantizedWeights(scale=float(scale), q=grid)
        else:
            raw, offset = _take(
                data, offset, 4 * n_act * places, target, f"weights of model {i}"
            )
            grid = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(n_act, places)
            if not np.all(np.isfinite(grid)):
                raise ModelFileError(
                    f"{target}: non-finite weights in model {i} at offset {offset - len(raw)}"
                )
            grid.setflags(write=False)
            weights = grid
        models.append(DrosoNet(seed=seed, projection=projection, weights=weights))

    if offset != len(data):
        raise ModelFileError(
            f"{target}: {len(data) - offset} unexpected trailing bytes at offset {offset}"
        )
    return Ensemble(models=models, radius=radius, master_seed=master_seed)
