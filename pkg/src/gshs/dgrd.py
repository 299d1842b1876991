"""Binary density dumps (format "DGRD v1") and CSV export.

Layout, little-endian: magic ``DGRD``, u32 version=1, u32 num_axes,
u32 mode_count, per axis {u32 count, f64 length, f64 offset}, f64 timestamp,
then ``mode_count * num_points`` f64 values row-major (last axis fastest,
modes outermost).
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .grid import DensityGrid, GridSpec

MAGIC = b"DGRD"
VERSION = 1


def write_dgrd(path, d: DensityGrid) -> None:
    grid = d.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, grid.num_axes, grid.mode_count))
        for n, L, o in zip(grid.counts, grid.lengths, grid.offsets):
            fh.write(struct.pack("<Idd", n, L, o))
        fh.write(struct.pack("<d", float(d.time)))
        fh.write(np.ascontiguousarray(d.values, dtype="<f8").tobytes())


def read_dgrd(path) -> DensityGrid:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a DGRD file")
        version, num_axes, mode_count = struct.unpack("<III", fh.read(12))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported DGRD version {version}")
        counts, lengths, offsets = [], [], []
        for _ in range(num_axes):
            n, L, o = struct.unpack("<Idd", fh.read(20))
            counts.append(n)
            lengths.append(L)
            offsets.append(o)
        (time,) = struct.unpack("<d", fh.read(8))
        grid = GridSpec(tuple(counts), tuple(lengths), tuple(offsets), mode_count)
        data = np.frombuffer(fh.read(8 * mode_count * grid.num_points), dtype="<f8")
        if data.size != mode_count * grid.num_points:
            raise ValueError(f"{path}: truncated DGRD payload")
    return DensityGrid(grid, data.reshape(mode_count, grid.num_points).copy(), time)


def export_csv(path, d: DensityGrid) -> None:
    """One row per grid point per mode: mode, coordinates, value."""
    grid = d.grid
    pts = grid.points
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode"] + [f"r{k}" for k in range(grid.num_axes)] + ["value"])
        for s in range(grid.mode_count):
            for j in range(grid.num_points):
                writer.writerow([s] + [repr(float(x)) for x in pts[j]] + [repr(float(d.values[s, j]))])


def dump_path(out_dir, time: float) -> Path:
    return Path(out_dir) / f"density_t{time:08.3f}.dgrd"
