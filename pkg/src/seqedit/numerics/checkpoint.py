"""Binary tensor container.

Layout (all integers little-endian)::

    b"SEQE"                         magic
    u32 version
    u32 tensor count
    per tensor:
        u32 name length, UTF-8 name
        u8  dtype code
        u8  rank
        u64 * rank dims
        u64 byte offset into the data section
    raw buffers, concatenated in table order

Names are written in sorted order so equal dicts give equal bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

MAGIC = b"SEQE"
VERSION = 1

_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<i8"), 4: np.dtype("u1")}
_CODES = {dt: code for code, dt in _DTYPES.items()}


class CheckpointError(ValueError):
    pass


def _code_for(arr: np.ndarray) -> int:
    dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
    if dt == np.float32:
        return 1
    if dt == np.float64:
        return 2
    if np.issubdtype(dt, np.integer) and dt != np.uint8:
        return 3
    if dt == np.uint8:
        return 4
    raise CheckpointError(f"unsupported dtype {arr.dtype}")


def dumps(tensors: dict[str, np.ndarray]) -> bytes:
    names = sorted(tensors)
    header = io.BytesIO()
    header.write(MAGIC)
    header.write(struct.pack("<II", VERSION, len(names)))
    buffers = []
    offset = 0
    for name in names:
        arr = np.asarray(tensors[name])
        code = _code_for(arr)
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
        encoded = name.encode("utf-8")
        header.write(struct.pack("<I", len(encoded)))
        header.write(encoded)
        header.write(struct.pack("<BB", code, arr.ndim))
        header.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        header.write(struct.pack("<Q", offset))
        buffers.append(raw)
        offset += len(raw)
    return header.getvalue() + b"".join(buffers)


def loads(blob: bytes) -> dict[str, np.ndarray]:
    f = io.BytesIO(blob)
    return _read(f)


def _read(f: BinaryIO) -> dict[str, np.ndarray]:
    if f.read(4) != MAGIC:
        raise CheckpointError("bad magic: not a SEQE checkpoint")
    version, count = struct.unpack("<II", f.read(8))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    table = []
    for _ in range(count):
        (n,) = struct.unpack("<I", f.read(4))
        name = f.read(n).decode("utf-8")
        code, rank = struct.unpack("<BB", f.read(2))
        if code not in _DTYPES:
            raise CheckpointError(f"tensor {name!r}: unknown dtype code {code}")
        dims = struct.unpack(f"<{rank}Q", f.read(8 * rank)) if rank else ()
        (offset,) = struct.unpack("<Q", f.read(8))
        table.append((name, _DTYPES[code], dims, offset))
    data = f.read()
    out = {}
    for name, dt, dims, offset in table:
        nbytes = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
        if offset + nbytes > len(data):
            raise CheckpointError(f"tensor {name!r}: truncated buffer")
        out[name] = np.frombuffer(data, dtype=dt, count=nbytes // dt.itemsize, offset=offset).reshape(dims).copy()
    return out


def save(path, tensors: dict[str, np.ndarray]) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(tensors))
    os.replace(tmp, path)


def load(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        return _read(f)


def pack_json(obj) -> np.ndarray:
    """Store a JSON-serializable object as a u8 tensor."""
    return np.frombuffer(json.dumps(obj, sort_keys=True).encode("utf-8"), dtype=np.uint8).copy()


def unpack_json(arr: np.ndarray):
    return json.loads(bytes(np.asarray(arr, dtype=np.uint8)).decode("utf-8"))


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def arrays_sha256(tensors: dict[str, np.ndarray]) -> str:
    return hashlib.sha256(dumps(tensors)).hexdigest()
