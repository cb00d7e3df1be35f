"""Binary checkpoint: magic, version byte, JSON header, raw float64 tensors.

Layout::

    b"DGMC" | version:u8 | header_len:u32le | header (utf-8 JSON) | data

The header lists tensors in order as ``{"name", "shape"}`` plus a free-form
``meta`` object; data is the little-endian concatenation of all tensors.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..exceptions import FormatError

MAGIC = b"DGMC"
VERSION = 1


def save_checkpoint(path, tensors: dict, meta: dict | None = None):
    header = {
        "tensors": [{"name": k, "shape": list(np.shape(v))} for k, v in tensors.items()],
        "meta": meta or {},
    }
    hb = json.dumps(header).encode()
    blob = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes() for v in tensors.values())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(MAGIC + struct.pack("<BI", VERSION, len(hb)) + hb + blob)


def load_checkpoint(path) -> tuple[dict, dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic at offset 0)")
    if len(raw) < 9:
        raise FormatError(f"{path}: truncated header at offset {len(raw)}")
    version, hlen = struct.unpack("<BI", raw[4:9])
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version} at offset 4")
    if len(raw) < 9 + hlen:
        raise FormatError(f"{path}: truncated header at offset {len(raw)} (need {9 + hlen})")
    try:
        header = json.loads(raw[9 : 9 + hlen])
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: corrupt header at offset {9 + e.pos}") from None
    offset = 9 + hlen
    tensors = {}
    for entry in header["tensors"]:
        n = int(np.prod(entry["shape"], dtype=np.int64)) if entry["shape"] else 1
        end = offset + 8 * n
        if end > len(raw):
            raise FormatError(f"{path}: truncated tensor {entry['name']!r} at offset {len(raw)} (need {end})")
        tensors[entry["name"]] = np.frombuffer(raw[offset:end], dtype="<f8").reshape(entry["shape"]).copy()
        offset = end
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes at offset {offset}")
    return tensors, header.get("meta", {})
