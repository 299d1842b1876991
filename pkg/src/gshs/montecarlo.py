"""Sample-path oracle: Euler-Maruyama motion with rate-triggered resets.

Each step advances the continuous state by Euler-Maruyama over ``dt``, then
draws a jump with probability ``1 - exp(-rate * dt)`` evaluated at the
post-motion state (matching the splitting order: continuous stage first).
On a jump the state is redrawn from the reset kernel.  Recording is
right-continuous: the state stored at a jump time is the post-jump state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NumericalError
from .grid import DensityGrid, GridSpec
from .model import Execution, GeneralKernel, GridDeltaKernel, GshsModel, SwitchingKernel

__all__ = ["sample_path", "simulate_ensemble", "histogram_density", "EnsembleSnapshot"]


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(probs.shape[0])
    return np.argmax(u[:, None] < cum, axis=1)


def _kernel_reset(model: GshsModel, rng: np.random.Generator, r: np.ndarray, s: int):
    """Redraw (r, s) from the reset kernel for a batch of jumping states."""
    kernel = model.kernel
    if isinstance(kernel, SwitchingKernel):
        probs = np.asarray(kernel.mode_probs(r, s), dtype=float)
        return r, _categorical(rng, probs)
    if isinstance(kernel, GridDeltaKernel):
        out = r.copy()
        mapped = np.asarray(kernel.reset_map(r), dtype=float)
        for j, axis in enumerate(kernel.delta_axes):
            out[:, axis] = mapped[:, j]
        if kernel.factor_sampler is None:
            raise NumericalError("grid-delta kernel has no sampler for Monte Carlo")
        draws = np.asarray(kernel.factor_sampler(rng, r), dtype=float)
        for j, axis in enumerate(kernel.free_axes(model.num_axes)):
            out[:, axis] = draws[:, j]
        return out, np.full(r.shape[0], s)
    if isinstance(kernel, GeneralKernel):
        if kernel.sampler is None:
            raise NumericalError("general kernel has no sampler for Monte Carlo")
        return kernel.sampler(rng, r, s)
    raise TypeError(f"unsupported kernel type: {type(kernel)!r}")


def _motion_step(model: GshsModel, t: float, r: np.ndarray, s: np.ndarray, dt: float, rng: np.random.Generator) -> np.ndarray:
    """One Euler-Maruyama motion step for a batch (no jumps)."""
    out = np.empty_like(r)
    sqrt_dt = np.sqrt(dt)
    for mode in range(model.num_modes):
        idx = np.flatnonzero(s == mode)
        if idx.size == 0:
            continue
        a = np.asarray(model.drift(t, r[idx], mode), dtype=float)
        b = np.asarray(model.diffusion(t, r[idx], mode), dtype=float)
        dw = rng.standard_normal((idx.size, model.noise_dim)) * sqrt_dt
        out[idx] = r[idx] + a * dt + np.einsum("mij,mj->mi", b, dw)
    if not np.all(np.isfinite(out)):
        raise NumericalError("sample path diverged to a non-finite state")
    return out


def _ensemble_step(
    model: GshsModel,
    t: float,
    r: np.ndarray,
    s: np.ndarray,
    dt: float,
    rng: np.random.Generator,
    motion_substeps: int = 1,
):
    """One Euler-Maruyama + jump step for a batch; returns (r, s, jumped mask).

    The motion may be refined below ``dt``; the jump draw stays at the ``dt``
    cadence (probability ``1 - exp(-rate dt)`` at the post-motion state), the
    same time discretization the splitting solver uses for its jump stage.
    """
    n = r.shape[0]
    h = dt / motion_substeps
    out = r
    for j in range(motion_substeps):
        out = _motion_step(model, t + j * h, out, s, h, rng)

    s_new = s.copy()
    jumped = np.zeros(n, dtype=bool)
    for mode in range(model.num_modes):
        idx = np.flatnonzero(s == mode)
        if idx.size == 0:
            continue
        lam = np.asarray(model.rate(out[idx], mode), dtype=float)
        p_jump = -np.expm1(-lam * dt)
        hit = idx[rng.random(idx.size) < p_jump]
        if hit.size:
            r_plus, s_plus = _kernel_reset(model, rng, out[hit], mode)
            out[hit] = r_plus
            s_new[hit] = s_plus
            jumped[hit] = True
    return out, s_new, jumped


@dataclass
class EnsembleSnapshot:
    time: float
    r: np.ndarray  # (n, N_r)
    s: np.ndarray  # (n,)


def simulate_ensemble(
    model: GshsModel,
    n_paths: int,
    t_end: float,
    dt: float,
    seed: int,
    record_times: Optional[Sequence[float]] = None,
    timing_out: Optional[list] = None,
    substeps: int = 1,
) -> list[EnsembleSnapshot]:
    """Jointly simulate ``n_paths`` executions; reproducible for a fixed seed.

    ``substeps`` refines the Euler-Maruyama motion below the step ``dt``;
    jump draws stay at the ``dt`` cadence either way.  Refinement is useful
    when the ensemble serves as an accuracy oracle, since the motion scheme's
    deterministic bias is O(motion step).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if model.initial_sampler is None:
        raise ValueError("model carries no initial sampler")
    rng = np.random.default_rng(seed)
    r, s = model.initial_sampler(rng, n_paths)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=np.int64)
    steps = int(round(t_end / dt))
    tol = dt * 1e-6
    wanted = record_times

    snaps: list[EnsembleSnapshot] = []
    if wanted is None or any(abs(0.0 - w) <= tol for w in wanted):
        snaps.append(EnsembleSnapshot(0.0, r.copy(), s.copy()))
    import time as _time

    for k in range(steps):
        tic = _time.perf_counter() if timing_out is not None else 0.0
        r, s, _ = _ensemble_step(model, k * dt, r, s, dt, rng, motion_substeps=substeps)
        if timing_out is not None:
            timing_out.append(_time.perf_counter() - tic)
        t = (k + 1) * dt
        if wanted is None or any(abs(t - w) <= tol for w in wanted):
            snaps.append(EnsembleSnapshot(t, r.copy(), s.copy()))
    return snaps


def sample_path(model: GshsModel, t_end: float, dt: float, rng_seed: int) -> Execution:
    """One execution recorded at every step; jump times are step-end times."""
    if model.initial_sampler is None:
        raise ValueError("model carries no initial sampler")
    rng = np.random.default_rng(rng_seed)
    r, s = model.initial_sampler(rng, 1)
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=np.int64)
    steps = int(round(t_end / dt))
    times = np.arange(steps + 1) * dt
    states_r = np.zeros((steps + 1, model.num_axes))
    states_s = np.zeros(steps + 1, dtype=np.int64)
    states_r[0] = r[0]
    states_s[0] = s[0]
    jumps = []
    for k in range(steps):
        r, s, jumped = _ensemble_step(model, k * dt, r, s, dt, rng)
        states_r[k + 1] = r[0]
        states_s[k + 1] = s[0]
        if jumped[0]:
            jumps.append(times[k + 1])
    return Execution(times, states_r, states_s, np.asarray(jumps))


def histogram_density(
    points: np.ndarray,
    modes: np.ndarray,
    grid: GridSpec,
    weights: Optional[np.ndarray] = None,
    angular_axes: Sequence[int] = (),
) -> tuple[DensityGrid, float]:
    """Count (weighted) samples into cells centered at the grid points.

    Angular coordinates are wrapped into the box first; samples outside the
    box on any other axis are dropped, and the dropped weight fraction is
    returned alongside the density.  The density is divided by the *total*
    sample weight, so it integrates to one minus the dropped fraction.
    """
    pts = np.asarray(points, dtype=float)
    modes = np.asarray(modes, dtype=np.int64)
    n = pts.shape[0]
    if n == 0:
        raise ValueError("histogram needs at least one sample")
    if weights is None:
        weights = np.full(n, 1.0 / n)
    else:
        weights = np.asarray(weights, dtype=float)
    total = float(weights.sum())
    if not total > 0:
        raise ValueError("histogram needs positive total weight")

    angular = set(int(k) for k in angular_axes)
    inside = np.ones(n, dtype=bool)
    idx_axes = []
    for k in range(grid.num_axes):
        h = grid.steps[k]
        raw = np.floor((pts[:, k] - grid.offsets[k]) / h + 0.5).astype(np.int64)
        if k in angular:
            raw = np.mod(raw, grid.counts[k])
        else:
            inside &= (raw >= 0) & (raw < grid.counts[k])
            raw = np.clip(raw, 0, grid.counts[k] - 1)
        idx_axes.append(raw)
    inside &= (modes >= 0) & (modes < grid.mode_count)

    flat = np.ravel_multi_index(tuple(ix[inside] for ix in idx_axes), grid.counts)
    flat += modes[inside] * grid.num_points
    acc = np.bincount(flat, weights=weights[inside], minlength=grid.mode_count * grid.num_points)
    values = acc.reshape(grid.mode_count, grid.num_points) / (total * grid.cell_volume)
    dropped = 1.0 - float(weights[inside].sum()) / total
    return DensityGrid(grid, values), dropped
