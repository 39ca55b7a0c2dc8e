"""Bit-exact model persistence.

File layout (all integers little-endian):

    bytes 0..3    magic "CFSN"
    bytes 4..7    format version, uint32
    bytes 8..11   header length in bytes, uint32
    header        UTF-8 JSON: {"config", "provenance", "tensors": [
                      {"name", "dtype", "shape", "offset", "nbytes"}, ...]}
    data          raw little-endian float32 tensor payloads; offsets are
                  relative to the start of the data section

Every model parameter appears exactly once; offsets must not overlap and
must lie within the file. Each failure mode raises a distinct error type
carrying a machine-readable ``code``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import CfsModel, ModelConfig, build_model, param_checksum

MAGIC = b"CFSN"
VERSION = 1
_DTYPES = {"f4": np.dtype("<f4")}


class CheckpointError(Exception):
    code = "checkpoint"


class BadMagicError(CheckpointError):
    code = "bad_magic"


class UnsupportedVersionError(CheckpointError):
    code = "unsupported_version"


class TruncatedFileError(CheckpointError):
    code = "truncated"


class DuplicateTensorError(CheckpointError):
    code = "duplicate_tensor"


class SchemaError(CheckpointError):
    code = "schema"


def save_checkpoint(model: CfsModel, path, provenance: dict | None = None):
    named = model.named_parameters()
    prov = dict(model.provenance)
    if provenance:
        prov.update(provenance)
    prov["model_id"] = param_checksum(model)[:16]

    directory = []
    blobs = []
    offset = 0
    for name in sorted(named):
        data = np.ascontiguousarray(named[name].data.astype("<f4", copy=False))
        raw = data.tobytes()
        directory.append({
            "name": name,
            "dtype": "f4",
            "shape": list(data.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)

    header = json.dumps({
        "config": model.config.to_dict(),
        "provenance": prov,
        "tensors": directory,
    }).encode("utf-8")
    with open(path, "wb") as fp:
        fp.write(MAGIC)
        fp.write(struct.pack("<II", VERSION, len(header)))
        fp.write(header)
        for raw in blobs:
            fp.write(raw)


def load_checkpoint(path) -> CfsModel:
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise TruncatedFileError("file shorter than the fixed header")
    if raw[:4] != MAGIC:
        raise BadMagicError(f"bad magic {raw[:4]!r}")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version != VERSION:
        raise UnsupportedVersionError(f"format version {version} not supported")
    if len(raw) < 12 + header_len:
        raise TruncatedFileError("header extends past end of file")
    try:
        header = json.loads(raw[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"unreadable header: {exc}") from None

    try:
        config = ModelConfig.from_dict(header["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad config: {exc}") from None
    directory = header.get("tensors", [])

    seen = set()
    spans = []
    data_start = 12 + header_len
    data_len = len(raw) - data_start
    for entry in directory:
        name = entry["name"]
        if name in seen:
            raise DuplicateTensorError(f"tensor {name!r} appears twice")
        seen.add(name)
        if entry["dtype"] not in _DTYPES:
            raise SchemaError(f"unknown dtype code {entry['dtype']!r}")
        off, nb = entry["offset"], entry["nbytes"]
        if off < 0 or nb < 0 or off + nb > data_len:
            raise TruncatedFileError(f"tensor {name!r} extends past end of file")
        spans.append((off, off + nb, name))
    spans.sort()
    for (s0, e0, n0), (s1, e1, n1) in zip(spans, spans[1:]):
        if s1 < e0:
            raise SchemaError(f"tensors {n0!r} and {n1!r} overlap")

    model = build_model(config, seed=0)
    expected = model.named_parameters()
    if seen != set(expected):
        missing = sorted(set(expected) - seen)
        extra = sorted(seen - set(expected))
        raise SchemaError(f"parameter set mismatch: missing={missing} extra={extra}")
    for entry in directory:
        p = expected[entry["name"]]
        dt = _DTYPES[entry["dtype"]]
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        if count * dt.itemsize != entry["nbytes"]:
            raise SchemaError(f"tensor {entry['name']!r} size/shape mismatch")
        arr = np.frombuffer(raw, dtype=dt, count=count,
                            offset=data_start + entry["offset"])
        arr = arr.reshape(entry["shape"]).astype(np.float32)
        if tuple(arr.shape) != tuple(p.data.shape):
            raise SchemaError(f"tensor {entry['name']!r} shape mismatch")
        p.data = arr
    model.provenance = header.get("provenance", {})
    return model
