"""Jump-stage generators and their matrix-exponential propagation.

The grid values of the density evolve by a linear ODE: the entry routing mass
from source point ``(r_m, s_n)`` into destination ``(r_i, s_j)`` is
``kappa(r_m, s_n, r_i, s_j) * rate(r_m, s_n) * cell_volume``, and every state
loses mass at its own rate (the diagonal).  Discretized kernels are rescaled
per source so their quadrature sum over destinations is exactly one, which
makes the column sums vanish and total mass exactly conserved.

Switching kernels decouple grid points, so the generator reduces to one small
mode-transition matrix per grid point.  Grid-delta kernels route the
deterministically reset axes to the nearest grid point and spread the free
axes by the kernel's density factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import NumericalError
from .grid import DensityGrid, GridSpec
from .linalg import expm_action, expm_nonneg_batch
from .model import GeneralKernel, GridDeltaKernel, GshsModel, SwitchingKernel

__all__ = [
    "SwitchingJumpGenerator",
    "MatrixJumpGenerator",
    "build_jump_generator",
    "propagate_jump",
    "DENSE_DIM_LIMIT",
]

DENSE_DIM_LIMIT = 4096        # largest stacked dimension with a cached dense exponential
GENERAL_DIM_LIMIT = 8192      # guard against accidentally materializing huge kernels


@dataclass
class SwitchingJumpGenerator:
    """Per-grid-point mode-transition rate matrices ``(num_points, N_s, N_s)``."""

    grid: GridSpec
    matrices: np.ndarray
    _exp_cache: dict = field(default_factory=dict, repr=False)

    def exponentials(self, dt: float) -> np.ndarray:
        E = self._exp_cache.get(dt)
        if E is None:
            E = expm_nonneg_batch(self.matrices, dt)
            self._exp_cache[dt] = E
        return E


@dataclass
class MatrixJumpGenerator:
    """Sparse generator on the stacked vector of grid values, modes outermost."""

    grid: GridSpec
    matrix: sp.csr_matrix
    _exp_cache: dict = field(default_factory=dict, repr=False)

    def exponential(self, dt: float):
        """One-step propagator ``exp(B dt)``, built once and reused.

        Dense up to the dense-dimension limit; beyond it a sparse operator is
        accumulated by uniformization (all series terms nonnegative, so the
        cached exponential cannot go negative from roundoff).  Returns None
        when the sparse product fills in too much to be worth caching.
        """
        if dt in self._exp_cache:
            return self._exp_cache[dt]
        dim = self.matrix.shape[0]
        if dim <= DENSE_DIM_LIMIT:
            E = scipy.linalg.expm(self.matrix.toarray() * dt)
        else:
            E = _sparse_uniformized_exponential(self.matrix, dt, nnz_cap=64 * dim)
        self._exp_cache[dt] = E
        return E


JumpGenerator = Union[SwitchingJumpGenerator, MatrixJumpGenerator]


def _sparse_uniformized_exponential(B: sp.csr_matrix, dt: float, nnz_cap: int, tol: float = 1e-15):
    """``exp(B dt)`` as a sparse matrix via the uniformized series, or None.

    With ``gamma`` dominating the diagonal, ``exp(B dt)`` is a Poisson mixture
    of powers of the substochastic ``P = I + B/gamma``; the support of the
    powers saturates quickly for jump generators whose destinations carry no
    further rate.  Gives up (returns None) if the series needs too many terms
    or the powers fill in beyond ``nnz_cap``.
    """
    diag = B.diagonal()
    gamma = float(max(-diag.min() if diag.size else 0.0, 0.0))
    lam = gamma * dt
    if lam == 0.0:
        return sp.identity(B.shape[0], format="csr")
    if lam > 200.0:
        return None
    ident = sp.identity(B.shape[0], format="csr")
    P = (ident + B / gamma).tocsr()
    weight = np.exp(-lam)
    total_weight = weight
    term = ident
    S = weight * ident
    for k in range(1, 400):
        term = (term @ P).tocsr()
        if term.nnz > nnz_cap:
            return None
        weight *= lam / k
        S = S + weight * term
        total_weight += weight
        if 1.0 - total_weight <= tol and k >= lam:
            return S.tocsr()
    return None


def _rates(model: GshsModel, grid: GridSpec) -> np.ndarray:
    pts = grid.points
    lam = np.stack([np.asarray(model.rate(pts, s), dtype=float) for s in range(model.num_modes)])
    if not np.all(np.isfinite(lam)):
        raise NumericalError("jump rate is non-finite on the grid")
    if lam.min() < 0:
        raise NumericalError("jump rate is negative on the grid")
    return lam


def _switching_generator(model: GshsModel, grid: GridSpec) -> SwitchingJumpGenerator:
    pts = grid.points
    ns, ng = model.num_modes, grid.num_points
    lam = _rates(model, grid)
    mats = np.zeros((ng, ns, ns))
    for s_from in range(ns):
        probs = np.asarray(model.kernel.mode_probs(pts, s_from), dtype=float)
        if probs.shape != (ng, ns):
            raise ValueError(f"mode_probs returned shape {probs.shape}")
        mats[:, :, s_from] = probs * lam[s_from][:, None]
        mats[:, s_from, s_from] -= lam[s_from]
    return SwitchingJumpGenerator(grid, mats)


def _general_generator(model: GshsModel, grid: GridSpec, normalize: bool) -> MatrixJumpGenerator:
    ns, ng = model.num_modes, grid.num_points
    dim = ns * ng
    if dim > GENERAL_DIM_LIMIT:
        raise ValueError(
            f"general kernels materialize a {dim}x{dim} matrix; "
            "declare a switching or grid-delta structure instead"
        )
    pts = grid.points
    dv = grid.cell_volume
    lam = _rates(model, grid)
    kappa = np.zeros((ns, ng, ns, ng))  # source mode, source point, dest mode, dest point
    for s_src in range(ns):
        for s_dst in range(ns):
            block = np.asarray(model.kernel.density(pts, s_src, pts, s_dst), dtype=float)
            if block.shape != (ng, ng):
                raise ValueError(f"kernel density returned shape {block.shape}")
            if not np.all(np.isfinite(block)):
                raise NumericalError("general kernel is non-finite at some grid pair")
            kappa[s_src, :, s_dst, :] = block
    if normalize:
        colsum = kappa.sum(axis=(2, 3)) * dv   # integral over destinations per source
        jumping = lam > 0
        if np.any(jumping & (colsum <= 0)):
            raise NumericalError("kernel carries no mass away from a jumping state")
        scale = np.divide(1.0, colsum, out=np.zeros_like(colsum), where=colsum > 0)
        kappa *= scale[:, :, None, None]
    gains = (kappa * (lam * dv)[:, :, None, None]).transpose(2, 3, 0, 1).reshape(dim, dim)
    B = gains
    B[np.arange(dim), np.arange(dim)] -= lam.ravel()
    return MatrixJumpGenerator(grid, sp.csr_matrix(B))


def _grid_delta_generator(model: GshsModel, grid: GridSpec, normalize: bool) -> MatrixJumpGenerator:
    kernel = model.kernel
    ns, ng = model.num_modes, grid.num_points
    dim = ns * ng
    pts = grid.points
    free = kernel.free_axes(grid.num_axes)
    if not free:
        raise ValueError("grid-delta kernels need at least one non-delta axis")

    # all destination combinations over the free axes
    free_idx = np.meshgrid(*(np.arange(grid.counts[k]) for k in free), indexing="ij")
    free_idx = [ix.ravel() for ix in free_idx]
    kfree = free_idx[0].size
    free_vals = np.stack([grid.axis_points(k)[free_idx[j]] for j, k in enumerate(free)], axis=-1)
    free_measure = float(np.prod([grid.steps[k] for k in free]))

    lam = _rates(model, grid)
    rows, cols, data = [], [], []
    for s in range(ns):
        src = np.flatnonzero(lam[s] > 0)
        if src.size == 0:
            continue
        mapped = np.asarray(kernel.reset_map(pts[src]), dtype=float)
        if mapped.shape != (src.size, len(kernel.delta_axes)):
            raise ValueError(f"reset_map returned shape {mapped.shape}")
        dens = np.asarray(kernel.factor_density(pts[src], free_vals), dtype=float)
        if dens.shape != (src.size, kfree):
            raise ValueError(f"factor_density returned shape {dens.shape}")
        if not np.all(np.isfinite(dens)) or dens.min() < 0:
            raise NumericalError("grid-delta density factor invalid on the grid")
        weights = dens * free_measure
        if normalize:
            tot = weights.sum(axis=1)
            if np.any(tot <= 0):
                raise NumericalError("grid-delta kernel carries no mass from a jumping state")
            weights = weights / tot[:, None]

        dest_axes = [None] * grid.num_axes
        for j, axis in enumerate(kernel.delta_axes):
            snap = grid.snap_indices(mapped[:, j], axis, wrap=axis in model.angular_axes)
            dest_axes[axis] = np.broadcast_to(snap[:, None], (src.size, kfree))
        for j, axis in enumerate(free):
            dest_axes[axis] = np.broadcast_to(free_idx[j][None, :], (src.size, kfree))
        dest_flat = np.ravel_multi_index(tuple(dest_axes), grid.counts)

        rows.append((s * ng + dest_flat).ravel())
        cols.append(np.repeat(s * ng + src, kfree))
        data.append((weights * lam[s][src, None]).ravel())

    loss = sp.diags(-lam.ravel())
    if rows:
        gains = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim),
        )
        B = (gains + loss).tocsr()
    else:
        B = loss.tocsr()
    B.sum_duplicates()
    return MatrixJumpGenerator(grid, B)


def build_jump_generator(model: GshsModel, grid: GridSpec, normalize: bool = True) -> JumpGenerator:
    """Build the jump generator in the variant the model's kernel declares."""
    if model.num_modes != grid.mode_count:
        raise ValueError("model mode count does not match the grid")
    if isinstance(model.kernel, SwitchingKernel):
        return _switching_generator(model, grid)
    if isinstance(model.kernel, GridDeltaKernel):
        return _grid_delta_generator(model, grid, normalize)
    if isinstance(model.kernel, GeneralKernel):
        return _general_generator(model, grid, normalize)
    raise TypeError(f"unsupported kernel type: {type(model.kernel)!r}")


def propagate_jump(gen: JumpGenerator, p: DensityGrid, dt: float) -> DensityGrid:
    """Advance grid values through ``exp(B dt)``.

    Switching generators apply one small cached exponential per grid point;
    matrix generators use a cached dense exponential up to the dense limit
    and a matrix-free exponential action beyond it.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if isinstance(gen, SwitchingJumpGenerator):
        E = gen.exponentials(dt)
        out = np.einsum("gij,gj->gi", E, p.values.T)
        return DensityGrid(p.grid, np.ascontiguousarray(out.T), p.time)
    vec = p.values.ravel()
    E = gen.exponential(dt)
    if E is not None:
        out = E @ vec
    else:
        out = expm_action(gen.matrix, vec, dt)
    return DensityGrid(p.grid, out.reshape(p.grid.mode_count, -1), p.time)
