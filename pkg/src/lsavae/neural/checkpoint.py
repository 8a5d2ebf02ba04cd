"""Versioned binary container for model parameters and seasonal stores.

Layout: the magic line ``LSAVAE-CONTAINER``, one line of compact JSON header
(schema version, array names and shapes, free-form metadata), then every
array as little-endian float64 in header order.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = b"LSAVAE-CONTAINER\n"
SCHEMA_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_container(path, kind: str, arrays: dict, meta: dict | None = None) -> Path:
    path = Path(path)
    header = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "arrays": [{"name": k, "shape": list(np.shape(v))} for k, v in arrays.items()],
        "meta": meta or {},
    }
    line = json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(line)
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())
    return path


def load_container(path, kind: str | None = None):
    """Returns ``(header, arrays)``; arrays keep header order."""
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: not an lsavae container")
    end = data.index(b"\n", len(MAGIC))
    header = json.loads(data[len(MAGIC):end])
    if header.get("schema_version") != SCHEMA_VERSION:
        raise CheckpointError(
            f"{path}: schema version {header.get('schema_version')} unsupported (expected {SCHEMA_VERSION})")
    if kind is not None and header.get("kind") != kind:
        raise CheckpointError(f"{path}: expected a {kind!r} container, found {header.get('kind')!r}")
    offset = end + 1
    arrays = {}
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        buf = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        arrays[spec["name"]] = buf.astype(np.float64).reshape(shape)
        offset += 8 * count
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes; file is corrupt")
    return header, arrays
