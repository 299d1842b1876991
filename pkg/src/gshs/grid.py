"""Periodic grids, densities living on them, and the discrete Fourier pair.

The grid along axis ``k`` holds ``counts[k]`` points ``offsets[k] + j*step_k``
with ``step_k = lengths[k]/counts[k]``, and the box is periodic with period
``lengths[k]``.  Frequencies are defined relative to the offset, so spectral
differentiation formulas are independent of where the box sits.  The forward
transform carries the ``1/N_g`` factor, i.e. the zero-frequency coefficient of
a unit-mass density equals ``1 / prod(lengths)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NumericalError

__all__ = [
    "GridSpec",
    "DensityGrid",
    "SpectralDensity",
    "dft",
    "idft",
    "evaluate_between_grid",
    "AbsoluteThreshold",
    "PeakFractionThreshold",
    "threshold_renormalize",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform discretization of a periodic rectangular box with discrete modes."""

    counts: tuple[int, ...]
    lengths: tuple[float, ...]
    offsets: tuple[float, ...]
    mode_count: int = 1

    def __post_init__(self):
        counts = tuple(int(n) for n in self.counts)
        lengths = tuple(float(x) for x in self.lengths)
        offsets = tuple(float(x) for x in self.offsets)
        if not counts:
            raise ValueError("grid needs at least one axis")
        if not len(counts) == len(lengths) == len(offsets):
            raise ValueError("counts, lengths and offsets must have equal length")
        if any(n < 1 for n in counts):
            raise ValueError("axis point counts must be >= 1")
        if any(not math.isfinite(x) or x <= 0 for x in lengths):
            raise ValueError("axis lengths must be positive")
        if any(not math.isfinite(x) for x in offsets):
            raise ValueError("axis offsets must be finite")
        if int(self.mode_count) < 1:
            raise ValueError("mode_count must be >= 1")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "mode_count", int(self.mode_count))

    @property
    def num_axes(self) -> int:
        return len(self.counts)

    @property
    def num_points(self) -> int:
        return int(np.prod(self.counts))

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.counts))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.steps))

    def axis_points(self, k: int) -> np.ndarray:
        n = self.counts[k]
        return self.offsets[k] + np.arange(n) * (self.lengths[k] / n)

    @cached_property
    def points(self) -> np.ndarray:
        """All grid coordinates, shape ``(num_points, num_axes)``, row-major."""
        mesh = np.meshgrid(*(self.axis_points(k) for k in range(self.num_axes)), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def frequencies(self, k: int) -> np.ndarray:
        """Integer frequencies of axis ``k`` in natural FFT storage order."""
        n = self.counts[k]
        return np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(np.int64)

    def first_derivative_gate(self, k: int) -> np.ndarray:
        """Per-frequency factor for first derivatives: 0 at the unmatched -N/2."""
        n = self.counts[k]
        gate = np.ones(n)
        if n % 2 == 0:
            gate[n // 2] = 0.0
        return gate

    def require_even(self) -> None:
        if any(n % 2 for n in self.counts):
            raise ValueError("spectral transforms need an even point count on every axis")

    def snap_indices(self, x, k: int, wrap: bool = False) -> np.ndarray:
        """Nearest grid index along axis ``k``; wraps periodically or clamps."""
        n = self.counts[k]
        h = self.lengths[k] / n
        idx = np.floor((np.asarray(x, dtype=float) - self.offsets[k]) / h + 0.5).astype(np.int64)
        if wrap:
            return np.mod(idx, n)
        return np.clip(idx, 0, n - 1)

    def same_geometry(self, other: "GridSpec") -> bool:
        return (
            self.counts == other.counts
            and np.allclose(self.lengths, other.lengths)
            and np.allclose(self.offsets, other.offsets)
        )


def _check_shape(grid: GridSpec, arr: np.ndarray, what: str) -> None:
    expected = (grid.mode_count, grid.num_points)
    if arr.shape != expected:
        raise ValueError(f"{what} must have shape {expected}, got {arr.shape}")


@dataclass
class DensityGrid:
    """Density samples on a grid, one row per discrete mode.

    ``values[s, j]`` is the density at mode ``s`` and grid point ``j`` in
    row-major point order (last axis fastest).
    """

    grid: GridSpec
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        _check_shape(self.grid, v, "density values")
        self.values = v

    def cube(self) -> np.ndarray:
        """Values reshaped to ``(mode_count, *counts)``."""
        return self.values.reshape((self.grid.mode_count, *self.grid.counts))

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def normalized(self) -> "DensityGrid":
        m = self.mass()
        if not m > 0.0:
            raise NumericalError("cannot normalize a density with nonpositive mass")
        return DensityGrid(self.grid, self.values / m, self.time)

    def copy(self) -> "DensityGrid":
        return DensityGrid(self.grid, self.values.copy(), self.time)


@dataclass
class SpectralDensity:
    """Fourier coefficients of a density, stored in natural FFT frequency order."""

    grid: GridSpec
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.coeffs, dtype=np.complex128))
        _check_shape(self.grid, c, "spectral coefficients")
        self.coeffs = c

    def cube(self) -> np.ndarray:
        return self.coeffs.reshape((self.grid.mode_count, *self.grid.counts))

    def copy(self) -> "SpectralDensity":
        return SpectralDensity(self.grid, self.coeffs.copy(), self.time)


def dft(d: DensityGrid) -> SpectralDensity:
    """Forward transform ``(1/N_g) sum_j f(r_j) exp(-2 pi i n.(r_j-o)/L)`` per mode."""
    grid = d.grid
    grid.require_even()
    axes = tuple(range(1, grid.num_axes + 1))
    coeffs = np.fft.fftn(d.cube(), axes=axes) / grid.num_points
    return SpectralDensity(grid, coeffs.reshape(grid.mode_count, -1), d.time)


def idft(f: SpectralDensity, max_imag: float = 1e-6) -> DensityGrid:
    """Inverse transform; exact at grid points for coefficients produced by dft.

    Imaginary residue of the reconstruction is discarded; residue above
    ``max_imag`` signals corrupted coefficients and raises.
    """
    grid = f.grid
    grid.require_even()
    axes = tuple(range(1, grid.num_axes + 1))
    vals = np.fft.ifftn(f.cube(), axes=axes) * grid.num_points
    residue = float(np.abs(vals.imag).max()) if vals.size else 0.0
    if residue > max_imag:
        raise NumericalError(f"inverse transform imaginary residue {residue:.3e} exceeds {max_imag:.1e}")
    return DensityGrid(grid, vals.real.reshape(grid.mode_count, -1), f.time)


def evaluate_between_grid(f: SpectralDensity, r, s: int) -> float:
    """Trigonometric interpolation of mode ``s`` at an arbitrary point ``r``.

    Returns the real part of the truncated Fourier series; small negative
    values between grid points are returned as-is.
    """
    grid = f.grid
    r = np.asarray(r, dtype=float)
    if r.shape != (grid.num_axes,):
        raise ValueError(f"point must have shape ({grid.num_axes},)")
    val = f.cube()[s]
    for k in range(grid.num_axes):
        x = (r[k] - grid.offsets[k]) / grid.lengths[k]
        phase = np.exp(2j * np.pi * grid.frequencies(k) * x)
        val = np.tensordot(val, phase, axes=([0], [0]))
    return float(np.real(val))


@dataclass(frozen=True)
class AbsoluteThreshold:
    """Zero out density values strictly below a fixed level."""

    value: float

    def __post_init__(self):
        if not self.value > 0.0:
            raise ValueError("absolute threshold must be positive")


@dataclass(frozen=True)
class PeakFractionThreshold:
    """Zero out density values strictly below a fraction of the peak."""

    fraction: float

    def __post_init__(self):
        if not 0.0 < self.fraction < 1.0:
            raise ValueError("peak fraction must lie in (0, 1)")


def threshold_renormalize(d: DensityGrid, policy) -> DensityGrid:
    """Clip small and negative values to exactly zero, then renormalize to unit mass."""
    if isinstance(policy, AbsoluteThreshold):
        tau = policy.value
    elif isinstance(policy, PeakFractionThreshold):
        tau = policy.fraction * float(d.values.max())
    else:
        raise TypeError(f"unsupported threshold policy: {policy!r}")
    kept = np.where(d.values < max(tau, 0.0), 0.0, d.values)
    mass = kept.sum() * d.grid.cell_volume
    if not mass > 0.0:
        raise NumericalError("thresholding removed all probability mass")
    return DensityGrid(d.grid, kept / mass, d.time)
