"""Sample grids as binary PGM (grey) or PPM (colour) files."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np


def mosaic(images, cols: int | None = None, pad: int = 2) -> np.ndarray:
    """Tile N x C x H x W images in [-1, 1] into one C x H' x W' array in [0, 255]."""
    x = np.asarray(images, dtype=np.float64)
    n, c, h, w = x.shape
    cols = cols or int(math.ceil(math.sqrt(n)))
    rows = int(math.ceil(n / cols))
    grid = np.zeros((c, rows * (h + pad) + pad, cols * (w + pad) + pad), dtype=np.uint8)
    pix = np.round((np.clip(x, -1, 1) + 1) * 127.5).astype(np.uint8)
    for i in range(n):
        r, q = divmod(i, cols)
        top, left = pad + r * (h + pad), pad + q * (w + pad)
        grid[:, top : top + h, left : left + w] = pix[i]
    return grid


def write_pnm(path, grid: np.ndarray) -> Path:
    """P5 for one channel, P6 for three."""
    path = Path(path)
    c, h, w = grid.shape
    if c not in (1, 3):
        raise ValueError("PNM output needs 1 or 3 channels")
    magic = b"P5" if c == 1 else b"P6"
    body = grid[0] if c == 1 else grid.transpose(1, 2, 0)
    with open(path, "wb") as fh:
        fh.write(magic + f"\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(body, dtype=np.uint8).tobytes())
    return path


def save_mosaic(images, path, cols: int | None = None) -> Path:
    """Write a grid; the suffix is forced to .pgm or .ppm to match the channel count."""
    grid = mosaic(images, cols)
    path = Path(path).with_suffix(".pgm" if grid.shape[0] == 1 else ".ppm")
    return write_pnm(path, grid)


def read_pnm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    body = data[pos + 1 :]  # exactly one whitespace byte ends the header
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError("only 8-bit PNM files are supported")
    c = 1 if magic == b"P5" else 3
    arr = np.frombuffer(body[: w * h * c], dtype=np.uint8)
    return arr.reshape(h, w)[None] if c == 1 else arr.reshape(h, w, 3).transpose(2, 0, 1)
