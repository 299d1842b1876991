"""Standalone reader for DGRD v1 density dumps.

Byte layout, little-endian: magic ``DGRD``, u32 version=1, u32 num_axes,
u32 mode_count, per axis {u32 count, f64 length, f64 offset}, f64 timestamp,
then ``mode_count * prod(counts)`` f64 values row-major (last axis fastest,
modes outermost).  Implemented against that layout directly; no code is
shared with the producer.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Dump:
    counts: tuple[int, ...]
    lengths: tuple[float, ...]
    offsets: tuple[float, ...]
    mode_count: int
    time: float
    values: np.ndarray  # (mode_count, *counts)

    @property
    def num_axes(self) -> int:
        return len(self.counts)

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.counts))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.steps))

    def axis_points(self, k: int) -> np.ndarray:
        return self.offsets[k] + np.arange(self.counts[k]) * self.steps[k]

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def marginal(self, axes: tuple[int, int]) -> np.ndarray:
        """2-D marginal density over the chosen axes, summed over modes.

        Integrates the other axes out with the cell measure, so the result
        integrates (over the kept plane) to the dump's total mass.
        """
        a, b = axes
        if a == b or not all(0 <= k < self.num_axes for k in (a, b)):
            raise ValueError(f"invalid axis pair {axes} for {self.num_axes} axes")
        keep = {a, b}
        out = self.values.sum(axis=0)
        measure = 1.0
        for k in sorted(range(self.num_axes), reverse=True):
            if k not in keep:
                out = out.sum(axis=k)
                measure *= self.steps[k]
        out = out * measure
        if a > b:
            out = out.T
        return out

    def mode_marginal(self) -> np.ndarray:
        return self.values.reshape(self.mode_count, -1).sum(axis=1) * self.cell_volume


def read_dump(path) -> Dump:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != b"DGRD":
            raise ValueError(f"{path}: not a DGRD file")
        version, num_axes, mode_count = struct.unpack("<III", fh.read(12))
        if version != 1:
            raise ValueError(f"{path}: unsupported DGRD version {version}")
        counts, lengths, offsets = [], [], []
        for _ in range(num_axes):
            n, length, offset = struct.unpack("<Idd", fh.read(20))
            counts.append(int(n))
            lengths.append(length)
            offsets.append(offset)
        (stamp,) = struct.unpack("<d", fh.read(8))
        num_points = int(np.prod(counts))
        payload = fh.read(8 * mode_count * num_points)
        data = np.frombuffer(payload, dtype="<f8")
        if data.size != mode_count * num_points:
            raise ValueError(f"{path}: truncated DGRD payload")
    values = data.reshape(mode_count, *counts).copy()
    return Dump(tuple(counts), tuple(lengths), tuple(offsets), mode_count, stamp, values)
