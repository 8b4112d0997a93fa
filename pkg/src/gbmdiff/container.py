"""Binary container for named float32 arrays with a JSON header.

Layout (all integers little-endian):

    8 bytes   magic b"GBMDARR1"
    u32       format version
    u32       header length, then UTF-8 JSON header
    u32       number of arrays
    per array:
        u32   name length, then UTF-8 name
        u32   ndim, then u32 per dimension
        f32   row-major payload

Round trips are bit-exact for float32 arrays, which is what both network
checkpoints and optimizer state require.
"""

from __future__ import annotations

import json
import struct
from typing import Mapping

import numpy as np

from .errors import DataError

MAGIC = b"GBMDARR1"
VERSION = 1


def write_array_container(path, header: dict, arrays: Mapping[str, np.ndarray]):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype=np.float32)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.astype("<f4", copy=False).tobytes())


def read_array_container(path):
    """Returns (header dict, {name: float32 array})."""
    with open(path, "rb") as fh:
        raw = fh.read()
    view = memoryview(raw)
    if len(raw) < len(MAGIC) + 4 or view[: len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: not a gbmdiff array container (bad magic)")
    off = len(MAGIC)

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(raw):
            raise DataError(f"{path}: truncated container")
        vals = struct.unpack_from(fmt, raw, off)
        off += size
        return vals[0] if len(vals) == 1 else vals

    version = take("<I")
    if version != VERSION:
        raise DataError(
            f"{path}: container version {version} unsupported (expected {VERSION})"
        )
    header_len = take("<I")
    if off + header_len > len(raw):
        raise DataError(f"{path}: truncated header")
    try:
        header = json.loads(bytes(view[off : off + header_len]).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: corrupt JSON header: {exc}") from exc
    off += header_len

    arrays = {}
    n_arrays = take("<I")
    for _ in range(n_arrays):
        name_len = take("<I")
        name = bytes(view[off : off + name_len]).decode("utf-8")
        off += name_len
        ndim = take("<I")
        shape = tuple(take("<I") for _ in range(ndim))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 4
        if off + nbytes > len(raw):
            raise DataError(f"{path}: truncated payload for array {name!r}")
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=off).reshape(shape)
        arrays[name] = arr.copy()
        off += nbytes
    if off != len(raw):
        raise DataError(f"{path}: {len(raw) - off} trailing bytes after payload")
    return header, arrays
