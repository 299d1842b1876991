"""Sampling-importance-resampling particle filter baseline."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalError
from .grid import DensityGrid, GridSpec
from .model import GshsModel
from .montecarlo import _ensemble_step, histogram_density

__all__ = ["ParticleEnsemble", "ensemble_from_density", "systematic_resample", "pf_step", "pf_density"]


@dataclass
class ParticleEnsemble:
    """Weighted hybrid-state particles; weights always sum to one."""

    r: np.ndarray        # (n, N_r)
    s: np.ndarray        # (n,)
    weights: np.ndarray  # (n,)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.s = np.asarray(self.s, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=float)
        if not (self.r.shape[0] == self.s.shape[0] == self.weights.shape[0]):
            raise ValueError("misaligned particle arrays")

    @property
    def count(self) -> int:
        return self.r.shape[0]


def ensemble_from_density(d: DensityGrid, count: int, rng: np.random.Generator) -> ParticleEnsemble:
    """Draw particles from a grid density, jittered uniformly within each cell."""
    grid = d.grid
    probs = (d.values * grid.cell_volume).ravel()
    total = probs.sum()
    if not total > 0:
        raise ValueError("cannot sample from an empty density")
    cum = np.cumsum(probs / total)
    cum[-1] = 1.0
    flat = np.searchsorted(cum, rng.random(count), side="right")
    s, cell = np.divmod(flat, grid.num_points)
    coords = grid.points[cell].copy()
    for k in range(grid.num_axes):
        h = grid.steps[k]
        coords[:, k] += rng.uniform(-h / 2, h / 2, size=count)
    return ParticleEnsemble(coords, s, np.full(count, 1.0 / count))


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling: one uniform offset, cumulative-weight traversal.

    A particle holding weight ``w`` among ``n`` receives ``floor(n w)`` or
    ``ceil(n w)`` copies.
    """
    n = weights.shape[0]
    positions = (np.arange(n) + rng.random()) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="right")


def pf_step(
    model: GshsModel,
    ens: ParticleEnsemble,
    z,
    dt: float,
    rng: np.random.Generator,
    t: float = 0.0,
) -> ParticleEnsemble:
    """Propagate every particle one dynamics step; weight and resample on a measurement."""
    r, s, _ = _ensemble_step(model, t, ens.r, ens.s, dt, rng)
    weights = ens.weights
    if z is not None:
        if model.likelihood is None:
            raise ValueError("model carries no measurement likelihood")
        like = np.zeros(ens.count)
        for mode in range(model.num_modes):
            idx = np.flatnonzero(s == mode)
            if idx.size:
                like[idx] = np.asarray(model.likelihood(z, r[idx], mode), dtype=float)
        weights = weights * like
        total = weights.sum()
        if not total > 0:
            raise NumericalError("all particle weights vanished under the likelihood")
        weights = weights / total
        keep = systematic_resample(weights, rng)
        r, s = r[keep], s[keep]
        weights = np.full(ens.count, 1.0 / ens.count)
    return ParticleEnsemble(r, s, weights)


def pf_density(
    ens: ParticleEnsemble, grid: GridSpec, angular_axes: Sequence[int] = ()
) -> tuple[DensityGrid, float]:
    """Weighted histogram of the ensemble; same contract as histogram_density."""
    return histogram_density(ens.r, ens.s, grid, weights=ens.weights, angular_axes=angular_axes)
