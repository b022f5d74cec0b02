"""Serialization: binary grid-field container, JSON descriptors, CSV writers.

Grid-field container layout (all little-endian):

    offset  size  field
    0       4     magic b"SDGF"
    4       1     format version (1)
    5       1     endianness tag (ord('<'))
    6       1     dim
    7       1     reserved (0)
    8       4     resolution N (uint32)
    12      8     box_length L (float64)
    20      ...   payload: complex128 coefficients, C order,
                  component-major, shape (dim, N, ..., N)

Radial profiles serialize as JSON descriptors (kind tag + parameters)
and are rebuilt through the synthesis registry.  CSV files are written
with repr-roundtrip floats and fixed row order, so identical inputs
produce byte-identical artifacts.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .fields import Grid, GridField, RadialSpectralProfile
from .synthesis import build_recipe

__all__ = [
    "save_grid_field",
    "load_grid_field",
    "save_profile_descriptor",
    "load_profile_descriptor",
    "write_csv",
]

_MAGIC = b"SDGF"
_VERSION = 1
_HEADER = struct.Struct("<4sBBBBId")


def save_grid_field(path: Union[str, Path], field: GridField) -> None:
    g = field.grid
    header = _HEADER.pack(_MAGIC, _VERSION, ord("<"), g.dim, 0,
                          g.resolution, g.box_length)
    payload = np.ascontiguousarray(field.coeffs, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes(order="C"))


def load_grid_field(path: Union[str, Path]) -> GridField:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError("truncated grid-field container")
        magic, version, endian, dim, _res, n, box = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise ValueError("not a grid-field container (bad magic)")
        if version != _VERSION:
            raise ValueError(f"unsupported container version {version}")
        if endian != ord("<"):
            raise ValueError("unsupported endianness tag")
        grid = Grid(dim, box, n)
        count = dim * n ** dim
        data = np.fromfile(fh, dtype="<c16", count=count)
        if data.size != count:
            raise ValueError("truncated coefficient payload")
    coeffs = data.astype(np.complex128).reshape((dim,) + (n,) * dim)
    return GridField(grid, coeffs)


def save_profile_descriptor(path: Union[str, Path], profile: RadialSpectralProfile) -> None:
    if profile.descriptor is None:
        raise ValueError("profile carries no serializable descriptor")
    with open(path, "w") as fh:
        json.dump(profile.descriptor, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_profile_descriptor(path: Union[str, Path],
                            grid: Optional[Grid] = None):
    with open(path) as fh:
        descriptor = json.load(fh)
    return build_recipe(descriptor, grid)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Union[str, Path], rows: Sequence[dict],
              columns: Optional[Sequence[str]] = None) -> None:
    """Write rows with deterministic formatting (repr floats, fixed order)."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])
