"""GFT1 binary tensor blocks.

A block is the 4-byte magic ``GFT1``, a little-endian u32 rank, ``rank``
little-endian u32 dimensions, then the values as little-endian float64 in
row-major order.
"""

from __future__ import annotations

import io
import struct
from typing import BinaryIO

import numpy as np

MAGIC = b"GFT1"


class FormatError(ValueError):
    pass


def write_block(fh: BinaryIO, array) -> None:
    arr = np.ascontiguousarray(np.asarray(array, dtype="<f8"))
    fh.write(MAGIC)
    fh.write(struct.pack("<I", arr.ndim))
    if arr.ndim:
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(arr.tobytes(order="C"))


def read_block(fh: BinaryIO) -> np.ndarray:
    magic = fh.read(4)
    if magic != MAGIC:
        raise FormatError(f"bad tensor magic {magic!r}")
    (rank,) = struct.unpack("<I", _read_exact(fh, 4))
    dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank)) if rank else ()
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    raw = _read_exact(fh, 8 * count)
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims)


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated tensor block: wanted {n} bytes, got {len(buf)}")
    return buf


def save_tensor(path, array) -> None:
    with open(path, "wb") as fh:
        write_block(fh, array)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_block(fh)


def to_bytes(array) -> bytes:
    buf = io.BytesIO()
    write_block(buf, array)
    return buf.getvalue()
