"""Spectral generator of the continuous (drift-diffusion) stage.

The Fourier coefficients of each mode's density evolve by a linear ODE whose
matrix couples frequency ``n`` to ``n - m`` for every harmonic ``m`` of the
drift and diffusion fields (a truncated convolution, indices wrapped by the
periodicity of the coefficients).  Row ``n`` carries the factor
``-2 pi i n_a c_a / L_a`` per drift axis, ``-4 pi^2 n_a n_b c_a c_b /(L_a L_b)``
per cross-diffusion pair and ``-4 pi^2 n_a^2 / L_a^2`` per diagonal diffusion
axis, where ``c`` gates out the unmatched ``-N/2`` frequency of first
derivatives.  The all-zero frequency row vanishes identically, so total mass
is conserved exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import NumericalError
from .grid import GridSpec, SpectralDensity
from .linalg import expm_action, expm_batched
from .model import GshsModel, diffusion_matrix

__all__ = ["ContinuousGenerator", "build_generator", "propagate_continuous", "DENSE_BLOCK_LIMIT"]

DENSE_BLOCK_LIMIT = 4096   # largest invariant block that gets a cached dense exponential
COEFF_DROP_TOL = 1e-14     # field harmonics below this magnitude are dropped


def _field_coefficients(grid: GridSpec, samples: np.ndarray) -> np.ndarray:
    """Forward transform of one real field sampled on the grid (flat output)."""
    cube = samples.reshape(grid.counts)
    return (np.fft.fftn(cube) / grid.num_points).ravel()


def _assemble_matrix(grid: GridSpec, a: np.ndarray, D: np.ndarray) -> sp.csr_matrix:
    """Sparse operator on coefficient vectors from drift/diffusion grid samples."""
    nr = grid.num_axes
    ng = grid.num_points
    shape_idx = np.meshgrid(*(np.arange(n) for n in grid.counts), indexing="ij")
    storage = [ix.ravel() for ix in shape_idx]                    # per-axis storage index per row
    freq = [grid.frequencies(k)[storage[k]] for k in range(nr)]   # per-axis frequency per row
    gate = [grid.first_derivative_gate(k)[storage[k]] for k in range(nr)]

    rows_acc, cols_acc, data_acc = [], [], []

    def add_term(field_samples: np.ndarray, row_coef: np.ndarray) -> None:
        fhat = _field_coefficients(grid, field_samples)
        keep = np.flatnonzero(np.abs(fhat) > COEFF_DROP_TOL)
        nz_rows = np.flatnonzero(row_coef != 0)
        if keep.size == 0 or nz_rows.size == 0:
            return
        keep_multi = np.unravel_index(keep, grid.counts)
        coefs = row_coef[nz_rows]
        for h, harmonic in enumerate(zip(*keep_multi)):
            col_axes = tuple(
                (storage[k][nz_rows] - harmonic[k]) % grid.counts[k] for k in range(nr)
            )
            rows_acc.append(nz_rows)
            cols_acc.append(np.ravel_multi_index(col_axes, grid.counts))
            data_acc.append(coefs * fhat[keep[h]])

    for alpha in range(nr):
        coef = -(2j * np.pi / grid.lengths[alpha]) * freq[alpha] * gate[alpha]
        add_term(a[:, alpha], coef)
    four_pi2 = 4.0 * np.pi**2
    for alpha in range(nr):
        for beta in range(nr):
            f = D[:, alpha, beta]
            if not np.any(f):
                continue
            if alpha == beta:
                coef = -(four_pi2 / grid.lengths[alpha] ** 2) * (freq[alpha].astype(float) ** 2)
            else:
                coef = -(
                    four_pi2 / (grid.lengths[alpha] * grid.lengths[beta])
                ) * freq[alpha] * freq[beta] * gate[alpha] * gate[beta]
            add_term(f, coef.astype(complex))

    if not rows_acc:
        return sp.csr_matrix((ng, ng), dtype=np.complex128)
    A = sp.coo_matrix(
        (np.concatenate(data_acc).astype(np.complex128),
         (np.concatenate(rows_acc), np.concatenate(cols_acc))),
        shape=(ng, ng),
    ).tocsr()
    A.sum_duplicates()
    return A


def _block_groups(A: sp.csr_matrix) -> Optional[list[np.ndarray]]:
    """Invariant subspaces of the operator as index groups of equal block size.

    Connected components of the (weakly connected) sparsity graph are exact
    invariant subspaces, so the exponential may be formed per block.  Returns
    None when some block exceeds the dense limit.
    """
    n = A.shape[0]
    pattern = sp.csr_matrix(
        (np.ones(A.data.shape[0]), A.indices.copy(), A.indptr.copy()), shape=A.shape
    )
    ncomp, labels = connected_components(pattern, directed=True, connection="weak")
    counts = np.bincount(labels, minlength=ncomp)
    if counts.max() > DENSE_BLOCK_LIMIT:
        return None
    order = np.argsort(labels, kind="stable")
    splits = np.cumsum(counts)[:-1]
    blocks = np.split(order, splits)
    by_size: dict[int, list[np.ndarray]] = {}
    for idx in blocks:
        by_size.setdefault(idx.size, []).append(idx)
    return [np.stack(group) for group in by_size.values()]


def _dense_blocks(A: sp.csr_matrix, groups: list[np.ndarray]) -> list[np.ndarray]:
    """Extract each group's blocks of A as a stacked dense array."""
    coo = A.tocoo()
    n = A.shape[0]
    group_id = np.full(n, -1, dtype=np.int64)
    block_ord = np.zeros(n, dtype=np.int64)
    pos = np.zeros(n, dtype=np.int64)
    for g, idxmat in enumerate(groups):
        nb, bs = idxmat.shape
        group_id[idxmat.ravel()] = g
        block_ord[idxmat.ravel()] = np.repeat(np.arange(nb), bs)
        pos[idxmat.ravel()] = np.tile(np.arange(bs), nb)
    dense = [np.zeros((g.shape[0], g.shape[1], g.shape[1]), dtype=np.complex128) for g in groups]
    gi = group_id[coo.row]
    for g in range(len(groups)):
        sel = gi == g
        np.add.at(dense[g], (block_ord[coo.row[sel]], pos[coo.row[sel]], pos[coo.col[sel]]), coo.data[sel])
    return dense


@dataclass
class ContinuousGenerator:
    """Operator advancing one mode's Fourier coefficients over time."""

    grid: GridSpec
    mode: int
    matrix: sp.csr_matrix
    time_invariant: bool
    build_time: float = 0.0
    rebuild: Optional[Callable] = None   # t -> csr matrix, for time-variant models
    _groups: Optional[list[np.ndarray]] = field(default=None, repr=False)
    _blocks: Optional[list[np.ndarray]] = field(default=None, repr=False)
    _exp_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.time_invariant:
            self._groups = _block_groups(self.matrix)
            if self._groups is not None:
                self._blocks = _dense_blocks(self.matrix, self._groups)

    def _exponentials(self, dt: float) -> list[np.ndarray]:
        exps = self._exp_cache.get(dt)
        if exps is None:
            exps = [expm_batched(blk * dt) for blk in self._blocks]
            self._exp_cache[dt] = exps
        return exps

    def apply_exp(self, vec: np.ndarray, dt: float) -> np.ndarray:
        """exp(A dt) @ vec for the time-invariant operator."""
        if self._blocks is not None:
            out = np.empty_like(vec, dtype=np.complex128)
            for idxmat, E in zip(self._groups, self._exponentials(dt)):
                out[idxmat] = np.einsum("bij,bj->bi", E, vec[idxmat])
            return out
        return expm_action(self.matrix, vec, dt)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """A @ vec (the instantaneous right-hand side)."""
        return self.matrix.dot(vec)


def build_generator(model: GshsModel, grid: GridSpec, s: int, t: float = 0.0) -> ContinuousGenerator:
    """Assemble the spectral operator of mode ``s`` from grid samples of the fields."""
    grid.require_even()
    pts = grid.points

    def matrix_at(tt: float) -> sp.csr_matrix:
        a = np.asarray(model.drift(tt, pts, s), dtype=float)
        if a.shape != (grid.num_points, grid.num_axes):
            raise ValueError(f"drift returned shape {a.shape}")
        D = diffusion_matrix(model, tt, pts, s)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(D))):
            raise NumericalError("drift/diffusion produced non-finite values on the grid")
        return _assemble_matrix(grid, a, D)

    return ContinuousGenerator(
        grid=grid,
        mode=s,
        matrix=matrix_at(t),
        time_invariant=model.time_invariant,
        build_time=t,
        rebuild=None if model.time_invariant else matrix_at,
    )


def _rk4_variable(gen: ContinuousGenerator, vec: np.ndarray, dt: float, t0: float, substeps: int) -> np.ndarray:
    cache: dict[float, sp.csr_matrix] = {}

    def A(tt: float) -> sp.csr_matrix:
        m = cache.get(tt)
        if m is None:
            m = gen.rebuild(tt)
            cache[tt] = m
        return m

    h = dt / substeps
    w = np.array(vec, dtype=np.complex128, copy=True)
    for i in range(substeps):
        t = t0 + i * h
        k1 = A(t).dot(w)
        k2 = A(t + h / 2).dot(w + (h / 2) * k1)
        k3 = A(t + h / 2).dot(w + (h / 2) * k2)
        k4 = A(t + h).dot(w + h * k3)
        w = w + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return w


def propagate_continuous(
    gen: ContinuousGenerator,
    f: SpectralDensity,
    s: int,
    dt: float,
    t0: Optional[float] = None,
    substeps: int = 4,
) -> SpectralDensity:
    """Advance mode ``s`` of the coefficient stack over one step of length ``dt``.

    Time-invariant operators use the exact matrix exponential (cached dense
    blocks, or a matrix-free exponential action beyond the dense limit);
    time-variant ones integrate the linear ODE with fixed-step RK4.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if s != gen.mode:
        raise ValueError(f"generator was built for mode {gen.mode}, not {s}")
    vec = f.coeffs[s]
    if gen.time_invariant:
        out = gen.apply_exp(vec, dt)
    else:
        start = gen.build_time if t0 is None else t0
        out = _rk4_variable(gen, vec, dt, start, max(4, substeps))
    new = f.copy()
    new.coeffs[s] = out
    return new
