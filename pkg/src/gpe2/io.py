"""GPE2 binary field files.

Layout, all little-endian::

    b"GPE2"            magic
    u16                format version (= 1)
    u32                N
    f64                L (half-width)
    f64                omega
    f64[N*N]           values, row-major (index [i, j], i along x1)
"""
from __future__ import annotations

import os
import struct
import warnings

import numpy as np

from .errors import FormatError
from .grid import Grid2D, ScalarField

MAGIC = b"GPE2"
VERSION = 1
_HEADER = struct.Struct("<4sHIdd")


def write_field(path: str | os.PathLike, field: ScalarField) -> None:
    grid = field.grid
    header = _HEADER.pack(MAGIC, VERSION, grid.points, grid.half_width, grid.omega)
    body = np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def read_field(path: str | os.PathLike) -> ScalarField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n, half_width, omega = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    expected = _HEADER.size + 8 * n * n
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, n)
    # warnings about undersized boxes belong to whoever created the grid
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        grid = Grid2D(half_width, n, omega)
    return ScalarField(grid, values.astype(float))
