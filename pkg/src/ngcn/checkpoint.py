"""Versioned binary checkpoints.

Layout (little-endian)::

    b"NGCN"  uint16 version  uint8 kind
    uint32 n_nodes, f, d, L
    float64 omega
    float64[] X (n*f), Y (n*d), W[0..L-1] (f*f each), all row-major
    uint32 crc32 of everything above

Tensors a model kind does not use are written with zero size (MF has no X/W,
GCN has no Y).
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .baselines import GcnParams, MfParams
from .model import NgcnParams

MAGIC = b"NGCN"
VERSION = 1
KIND_TAGS = {"ngcn": 0, "mf": 1, "gcn": 2}
_HEADER = struct.Struct("<4sHB4Id")


class CheckpointError(ValueError):
    pass


def _kind_of(params) -> str:
    if isinstance(params, NgcnParams):
        return "ngcn"
    if isinstance(params, MfParams):
        return "mf"
    if isinstance(params, GcnParams):
        return "gcn"
    raise TypeError(f"cannot checkpoint {type(params).__name__}")


def dumps(params) -> bytes:
    kind = _kind_of(params)
    X = getattr(params, "X", None)
    Y = getattr(params, "Y", None)
    W = getattr(params, "W", [])
    n = params.n_nodes
    f = 0 if X is None else X.shape[1]
    d = 0 if Y is None else Y.shape[1]
    omega = float(getattr(params, "omega", 0.0))
    parts = [_HEADER.pack(MAGIC, VERSION, KIND_TAGS[kind], n, f, d, len(W), omega)]
    for a in ([] if X is None else [X]) + ([] if Y is None else [Y]) + list(W):
        parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def loads(blob: bytes):
    if len(blob) < _HEADER.size + 4:
        raise CheckpointError("truncated checkpoint")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checksum mismatch")
    magic, version, tag, n, f, d, L, omega = _HEADER.unpack_from(body)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    kinds = {v: k for k, v in KIND_TAGS.items()}
    if tag not in kinds:
        raise CheckpointError(f"unknown model kind tag {tag}")
    data = np.frombuffer(body, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    sizes = [n * f, n * d] + [f * f] * L
    if data.size != sum(sizes):
        raise CheckpointError("payload size does not match header")
    chunks = np.split(data, np.cumsum(sizes)[:-1])
    X = chunks[0].reshape(n, f)
    Y = chunks[1].reshape(n, d)
    W = [c.reshape(f, f) for c in chunks[2:]]
    kind = kinds[tag]
    if kind == "ngcn":
        return NgcnParams(X, W, Y, omega)
    if kind == "mf":
        return MfParams(Y)
    return GcnParams(X, W)


def save(params, path) -> None:
    Path(path).write_bytes(dumps(params))


def load(path):
    return loads(Path(path).read_bytes())
