"""Binary grid snapshots.

Layout (little-endian throughout):

    magic   4 bytes  b"QDSG"
    version u16      currently 1
    dtype   u8       0 = float64, 1 = complex128 (interleaved re/im pairs)
    naxes   u8       number of array axes
    counts  naxes * u32
    extents naxes * f64   (half-width of the axis domain [-L, L))
    payload row-major float64, complex values as interleaved pairs

A Wigner snapshot stores 2d axes: the d position axes followed by the d
velocity axes, whose extents must equal the FFT-dual value N/2 * pi / L.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grids import SpatialGrid, dual_velocity_grid
from .states import WignerGrid

__all__ = ["write_array", "read_array", "write_wigner", "read_wigner"]

MAGIC = b"QDSG"
VERSION = 1


def write_array(path: str | Path, values: np.ndarray,
                extents: tuple[float, ...]) -> None:
    values = np.asarray(values)
    if len(extents) != values.ndim:
        raise ValueError("one extent per array axis required")
    complex_payload = np.iscomplexobj(values)
    header = MAGIC + struct.pack("<HBB", VERSION, 1 if complex_payload else 0,
                                 values.ndim)
    header += struct.pack(f"<{values.ndim}I", *values.shape)
    header += struct.pack(f"<{values.ndim}d", *extents)
    if complex_payload:
        payload = np.ascontiguousarray(values, dtype="<c16").tobytes()
    else:
        payload = np.ascontiguousarray(values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_array(path: str | Path) -> tuple[np.ndarray, tuple[float, ...]]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a QDSG snapshot")
    version, dtype_code, naxes = struct.unpack("<HBB", raw[4:8])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    off = 8
    counts = struct.unpack(f"<{naxes}I", raw[off:off + 4 * naxes])
    off += 4 * naxes
    extents = struct.unpack(f"<{naxes}d", raw[off:off + 8 * naxes])
    off += 8 * naxes
    size = int(np.prod(counts))
    if dtype_code == 1:
        values = np.frombuffer(raw, dtype="<c16", count=size, offset=off)
    elif dtype_code == 0:
        values = np.frombuffer(raw, dtype="<f8", count=size, offset=off)
    else:
        raise ValueError(f"{path}: unknown dtype code {dtype_code}")
    return values.reshape(counts).copy(), extents


def write_wigner(path: str | Path, w: WignerGrid) -> None:
    d = w.grid_x.dim
    extents = (w.grid_x.extent,) * d + (w.grid_xi.extent,) * d
    write_array(path, w.values, extents)


def read_wigner(path: str | Path) -> WignerGrid:
    values, extents = read_array(path)
    if values.ndim % 2 != 0:
        raise ValueError(f"{path}: Wigner snapshot needs an even axis count")
    d = values.ndim // 2
    points = values.shape[0]
    if values.shape != (points,) * (2 * d):
        raise ValueError(f"{path}: Wigner snapshot axes must share one size")
    grid = SpatialGrid(dim=d, points=points, extent=extents[0])
    dual = dual_velocity_grid(grid)
    for ax in range(d):
        if abs(extents[ax] - grid.extent) > 1e-12 * grid.extent:
            raise ValueError(f"{path}: inconsistent spatial extents")
        if abs(extents[d + ax] - dual.extent) > 1e-9 * dual.extent:
            raise ValueError(
                f"{path}: velocity extent {extents[d + ax]} is not the "
                f"FFT-dual value {dual.extent}"
            )
    if np.iscomplexobj(values):
        raise ValueError(f"{path}: Wigner values must be real")
    return WignerGrid(grid_x=grid, values=values)
