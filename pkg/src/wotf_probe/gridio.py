"""Lossless grid files and lossy PGM previews.

WPGD layout (little-endian)::

    4 bytes   magic  b"WPGD"
    4 bytes   dtype tag b"f64\\0"
    u32       rows
    u32       cols
    rows*cols float64, row-major
"""

import struct
from pathlib import Path

import numpy as np

from ._util import atomic_write_bytes
from .datasets import save_pgm

__all__ = ["GridFormatError", "write_grid", "read_grid", "write_preview"]

MAGIC = b"WPGD"
DTYPE_F64 = b"f64\0"
_HEADER = struct.Struct("<4s4sII")


class GridFormatError(ValueError):
    pass


def write_grid(path, grid):
    grid = np.asarray(grid, dtype="<f8")
    if grid.ndim != 2:
        raise ValueError(f"write_grid expects a 2-D array, got shape {grid.shape}")
    atomic_write_bytes(path, _HEADER.pack(MAGIC, DTYPE_F64, *grid.shape)
                       + np.ascontiguousarray(grid).tobytes())


def read_grid(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise GridFormatError(f"{path}: file too short for a WPGD header")
    magic, tag, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise GridFormatError(f"{path}: bad magic {magic!r}")
    if tag != DTYPE_F64:
        raise GridFormatError(f"{path}: unsupported dtype tag {tag!r}")
    need = rows * cols * 8
    if len(data) - _HEADER.size != need:
        raise GridFormatError(f"{path}: payload is {len(data) - _HEADER.size} bytes, "
                              f"expected {need}")
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).copy()


def write_preview(path, grid, label=""):
    """Min-max scaled 8-bit PGM for eyeballing; the header comment records the lossy mapping."""
    grid = np.asarray(grid, dtype=float)
    lo, hi = float(grid.min()), float(grid.max())
    span = hi - lo
    img = np.zeros(grid.shape, np.uint8) if span == 0 else \
        np.round((grid - lo) * (255.0 / span)).astype(np.uint8)
    note = f"PREVIEW ONLY (lossy, min-max scaled) {label}".rstrip()
    save_pgm(img, path, comment=f"{note}\n0 -> {lo!r}, 255 -> {hi!r}")
