"""The stochastic hybrid system model interface consumed by every solver.

A model is the collection of drift, diffusion, jump rate, reset kernel,
initial density and mode count, plus an optional measurement likelihood.
All callbacks are vectorized over a leading batch of continuous states and
must be pure: solvers may call them concurrently.

Callback conventions (``M`` = batch size, ``N_r`` = continuous dimensions,
``N_w`` = noise dimensions, ``N_s`` = mode count):

- ``drift(t, r, s) -> (M, N_r)`` for ``r`` of shape ``(M, N_r)``, mode ``s``;
- ``diffusion(t, r, s) -> (M, N_r, N_w)``;
- ``rate(r, s) -> (M,)`` nonnegative;
- ``likelihood(z, r, s) -> (M,)`` nonnegative;
- kernels as documented on the kernel classes below.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .grid import DensityGrid, GridSpec

__all__ = [
    "HybridState",
    "Execution",
    "GeneralKernel",
    "SwitchingKernel",
    "GridDeltaKernel",
    "GshsModel",
    "diffusion_matrix",
    "ValidationReport",
    "validate",
]


@dataclass(frozen=True)
class HybridState:
    """Continuous state vector paired with a discrete mode index."""

    r: np.ndarray
    s: int

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if r.ndim != 1 or not np.all(np.isfinite(r)):
            raise ValueError("continuous state must be a finite vector")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", int(self.s))


@dataclass
class Execution:
    """A right-continuous sample path: states at a jump time are post-jump."""

    times: np.ndarray
    states_r: np.ndarray  # (T, N_r)
    states_s: np.ndarray  # (T,)
    jump_times: np.ndarray

    def state_at(self, t: float) -> HybridState:
        k = int(np.argmin(np.abs(self.times - t)))
        return HybridState(self.states_r[k], int(self.states_s[k]))


@dataclass(frozen=True)
class GeneralKernel:
    """Unstructured reset kernel given by a density over destination states.

    ``density(r_src, s_src, r_dst, s_dst) -> (M, K)`` for source points of
    shape ``(M, N_r)`` and destination points of shape ``(K, N_r)``.
    ``sampler(rng, r, s) -> (r_plus, s_plus)`` is needed only for Monte Carlo.
    """

    density: Callable
    sampler: Optional[Callable] = None


@dataclass(frozen=True)
class SwitchingKernel:
    """Delta-structured kernel of a switching diffusion: jumps change only the mode.

    ``mode_probs(r, s_src) -> (M, N_s)`` rows must sum to one.
    """

    mode_probs: Callable


@dataclass(frozen=True)
class GridDeltaKernel:
    """Kernel with a deterministic reset on some axes and a density on the rest.

    ``delta_axes`` lists the deterministically reset axes; ``reset_map(r)``
    returns their new values with shape ``(M, len(delta_axes))``.  The other
    ("free") axes are redrawn from ``factor_density(r_src, w) -> (M, K)``
    evaluated at free-axis coordinates ``w`` of shape ``(K, n_free)``.
    ``factor_sampler(rng, r_src) -> (M, n_free)`` draws them for Monte Carlo.
    The mode is left unchanged by this kernel.
    """

    delta_axes: tuple[int, ...]
    reset_map: Callable
    factor_density: Callable
    factor_sampler: Optional[Callable] = None

    def free_axes(self, num_axes: int) -> tuple[int, ...]:
        return tuple(k for k in range(num_axes) if k not in self.delta_axes)


Kernel = Union[GeneralKernel, SwitchingKernel, GridDeltaKernel]


@dataclass
class GshsModel:
    """A general stochastic hybrid system plus optional measurement model."""

    num_axes: int
    num_modes: int
    noise_dim: int
    drift: Callable
    diffusion: Callable
    rate: Callable
    kernel: Kernel
    initial_density: Optional[DensityGrid] = None
    likelihood: Optional[Callable] = None
    time_invariant: bool = True
    angular_axes: tuple[int, ...] = ()
    initial_sampler: Optional[Callable] = None      # (rng, n) -> (r (n, N_r), s (n,))
    measurement_sampler: Optional[Callable] = None  # (rng, r (N_r,), s) -> z
    measurement_state_axes: Optional[tuple[int, ...]] = None
    extra_checks: list = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        if self.num_axes < 1 or self.num_modes < 1 or self.noise_dim < 0:
            raise ValueError("invalid model dimensions")
        self.angular_axes = tuple(self.angular_axes)


def diffusion_matrix(model: GshsModel, t: float, r: np.ndarray, s: int) -> np.ndarray:
    """Diffusion matrix ``0.5 * b @ b.T`` (symmetric positive semidefinite).

    Accepts a single point ``(N_r,)`` or a batch ``(M, N_r)`` and returns the
    matching ``(N_r, N_r)`` or ``(M, N_r, N_r)``.
    """
    r = np.asarray(r, dtype=float)
    single = r.ndim == 1
    batch = r[None, :] if single else r
    b = np.asarray(model.diffusion(t, batch, s), dtype=float)
    if b.shape != (batch.shape[0], model.num_axes, model.noise_dim):
        raise ValueError(f"diffusion callback returned shape {b.shape}")
    D = 0.5 * np.einsum("mij,mkj->mik", b, b)
    return D[0] if single else D


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(model: GshsModel, grid: GridSpec, t: float = 0.0) -> ValidationReport:
    """Report-only diagnostics of a model sampled on a grid."""
    report = ValidationReport()
    pts = grid.points

    for s in range(model.num_modes):
        lam = np.asarray(model.rate(pts, s), dtype=float)
        if lam.shape != (grid.num_points,):
            report.violations.append(f"rate shape mismatch in mode {s}: {lam.shape}")
            continue
        if not np.all(np.isfinite(lam)):
            report.violations.append(f"non-finite rate in mode {s}")
        elif lam.min() < 0:
            report.violations.append(f"negative rate in mode {s}: min {lam.min():.3e}")

    for s in range(model.num_modes):
        a = np.asarray(model.drift(t, pts, s), dtype=float)
        if a.shape != (grid.num_points, model.num_axes) or not np.all(np.isfinite(a)):
            report.violations.append(f"drift invalid in mode {s}")
        D = diffusion_matrix(model, t, pts, s)
        if not np.all(np.isfinite(D)):
            report.violations.append(f"diffusion invalid in mode {s}")
        else:
            eigs = np.linalg.eigvalsh(D)
            if eigs.min() < -1e-10:
                report.violations.append(f"diffusion matrix not PSD in mode {s}")

    if isinstance(model.kernel, SwitchingKernel):
        for s in range(model.num_modes):
            probs = np.asarray(model.kernel.mode_probs(pts, s), dtype=float)
            if probs.shape != (grid.num_points, model.num_modes):
                report.violations.append(f"kernel row shape mismatch from mode {s}")
                continue
            err = np.abs(probs.sum(axis=1) - 1.0).max()
            if err > 1e-9:
                report.violations.append(f"kernel row sum off by {err:.3e} from mode {s}")
            if probs.min() < 0:
                report.violations.append(f"negative kernel probability from mode {s}")
    elif isinstance(model.kernel, GridDeltaKernel):
        mapped = np.asarray(model.kernel.reset_map(pts), dtype=float)
        snap_err = 0.0
        for j, axis in enumerate(model.kernel.delta_axes):
            wrap = axis in model.angular_axes
            idx = grid.snap_indices(mapped[:, j], axis, wrap=wrap)
            snapped = grid.axis_points(axis)[idx]
            diff = np.abs(snapped - mapped[:, j])
            if wrap:
                L = grid.lengths[axis]
                diff = np.minimum(diff, L - diff)
            snap_err = max(snap_err, float(diff.max()))
        if snap_err > 0:
            report.warnings.append(f"reset image snapped to grid with max error {snap_err:.3e}")

    if model.initial_density is not None:
        init = model.initial_density
        if not init.grid.same_geometry(grid):
            report.warnings.append("initial density grid differs from the solver grid")
        if init.values.min() < 0:
            report.violations.append("initial density has negative values")
        if abs(init.mass() - 1.0) > 1e-9:
            report.violations.append(f"initial density mass {init.mass():.12f} != 1")

    for check in model.extra_checks:
        check(model, grid, report)
    return report
