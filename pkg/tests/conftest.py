"""Shared toy models and helpers for the test suite."""

import numpy as np
import pytest

from gshs.grid import DensityGrid, GridSpec
from gshs.model import GshsModel, SwitchingKernel


def constant_coefficient_model(
    drift_value=0.0,
    diffusion_value=0.0,
    rate_value=0.0,
    num_modes=1,
    num_axes=1,
):
    """Spatially constant single-noise model; modes swap cyclically on a jump."""

    def drift(t, r, s):
        return np.full_like(r, drift_value)

    def diffusion(t, r, s):
        out = np.zeros((r.shape[0], num_axes, 1))
        out[:, -1, 0] = np.sqrt(2.0 * diffusion_value)
        return out

    def rate(r, s):
        return np.full(r.shape[0], rate_value)

    def probs(r, s):
        out = np.zeros((r.shape[0], num_modes))
        out[:, (s + 1) % num_modes] = 1.0
        return out

    return GshsModel(
        num_axes=num_axes,
        num_modes=num_modes,
        noise_dim=1,
        drift=drift,
        diffusion=diffusion,
        rate=rate,
        kernel=SwitchingKernel(probs),
    )


def gaussian_density(grid: GridSpec, centers, sigmas, mode_weights=None) -> DensityGrid:
    pts = grid.points
    logp = np.zeros(grid.num_points)
    for k, (c, s) in enumerate(zip(centers, sigmas)):
        logp -= 0.5 * ((pts[:, k] - c) / s) ** 2
    vals = np.exp(logp)
    if mode_weights is None:
        mode_weights = [1.0] + [0.0] * (grid.mode_count - 1)
    values = np.asarray(mode_weights, dtype=float)[:, None] * vals[None, :]
    return DensityGrid(grid, values).normalized()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
