"""Splitting step and multi-step propagation."""

import dataclasses

import numpy as np
import pytest

from gshs.continuous import propagate_continuous
from gshs.grid import AbsoluteThreshold, DensityGrid, GridSpec, dft, idft
from gshs.jump import propagate_jump
from gshs.model import SwitchingKernel
from gshs.splitting import build_split_generators, propagate, split_step
from tests.conftest import constant_coefficient_model, gaussian_density


def smooth_two_mode_model(L=2 * np.pi):
    """Two modes with different drifts/diffusions and a smooth switching rate."""

    def drift(t, r, s):
        return np.full_like(r, 0.8 if s == 0 else -0.5)

    def diffusion(t, r, s):
        out = np.zeros((r.shape[0], 1, 1))
        out[:, 0, 0] = np.sqrt(2 * (0.05 if s == 0 else 0.08))
        return out

    def rate(r, s):
        return 1.5 * (1.0 + 0.5 * np.sin(2 * np.pi * r[:, 0] / L + s))

    def probs(r, s):
        out = np.zeros((r.shape[0], 2))
        out[:, 1 - s] = 1.0
        return out

    base = constant_coefficient_model(num_modes=2)
    return dataclasses.replace(
        base, drift=drift, diffusion=diffusion, rate=rate, kernel=SwitchingKernel(probs)
    )


class TestSplitStep:
    def test_no_jumps_equals_continuous_alone(self, rng):
        grid = GridSpec((32,), (4.0,), (0.0,))
        model = constant_coefficient_model(drift_value=0.7, diffusion_value=0.02)
        gens = build_split_generators(model, grid)
        p = gaussian_density(grid, [2.0], [0.4])
        stepped = split_step(gens, p, 0.1)
        cont = idft(propagate_continuous(gens.continuous[0], dft(p), 0, 0.1))
        np.testing.assert_allclose(stepped.values, cont.values, atol=1e-13)

    def test_no_motion_equals_jump_alone(self, rng):
        grid = GridSpec((8,), (4.0,), (0.0,), mode_count=2)
        model = constant_coefficient_model(rate_value=2.0, num_modes=2)
        gens = build_split_generators(model, grid)
        p = DensityGrid(grid, rng.random((2, 8))).normalized()
        stepped = split_step(gens, p, 0.1)
        jumped = propagate_jump(gens.jump, p, 0.1)
        np.testing.assert_allclose(stepped.values, jumped.values, atol=1e-13)

    def test_time_advances(self):
        grid = GridSpec((8,), (4.0,), (0.0,))
        model = constant_coefficient_model()
        gens = build_split_generators(model, grid)
        p = gaussian_density(grid, [2.0], [0.5])
        out = split_step(gens, p, 0.25)
        assert out.time == pytest.approx(0.25)


class TestPropagate:
    def test_zero_steps_returns_initial(self):
        grid = GridSpec((8,), (4.0,), (0.0,))
        model = constant_coefficient_model()
        gens = build_split_generators(model, grid)
        p0 = gaussian_density(grid, [2.0], [0.5])
        res = propagate(gens, p0, 0.0, 0.1, record_times=[0.0])
        assert len(res.densities) == 1
        np.testing.assert_array_equal(res.densities[0].values, p0.values)

    def test_noninteger_horizon_rejected(self):
        grid = GridSpec((8,), (4.0,), (0.0,))
        model = constant_coefficient_model()
        gens = build_split_generators(model, grid)
        p0 = gaussian_density(grid, [2.0], [0.5])
        with pytest.raises(ValueError):
            propagate(gens, p0, 0.35, 0.1)

    def test_unit_mass_after_every_step(self):
        grid = GridSpec((32,), (2 * np.pi,), (0.0,), mode_count=2)
        model = smooth_two_mode_model()
        gens = build_split_generators(model, grid)
        p0 = gaussian_density(grid, [np.pi], [0.5], mode_weights=[0.7, 0.3])
        res = propagate(gens, p0, 1.0, 0.05, threshold=AbsoluteThreshold(1e-6))
        for d in res.densities:
            assert d.mass() == pytest.approx(1.0, abs=1e-9)
            assert d.values.min() >= 0.0

    def test_deterministic_bitwise(self):
        grid = GridSpec((32,), (2 * np.pi,), (0.0,), mode_count=2)
        model = smooth_two_mode_model()
        p0 = gaussian_density(grid, [np.pi], [0.5], mode_weights=[0.6, 0.4])
        outs = []
        for _ in range(2):
            gens = build_split_generators(model, grid)
            res = propagate(gens, p0, 0.5, 0.05, threshold=AbsoluteThreshold(1e-8))
            outs.append(res.final.values)
        np.testing.assert_array_equal(outs[0], outs[1])

    def test_first_order_self_convergence(self):
        grid = GridSpec((32,), (2 * np.pi,), (0.0,), mode_count=2)
        model = smooth_two_mode_model()
        gens = build_split_generators(model, grid)
        p0 = gaussian_density(grid, [np.pi], [0.6], mode_weights=[1.0, 0.0])
        T = 0.8
        sols = []
        for dt in [0.1, 0.05, 0.025, 0.0125, 0.00625]:
            res = propagate(gens, p0, T, dt, threshold=None, record_times=[T])
            sols.append(res.final)
        diffs = [
            np.abs(a.values - b.values).sum() * grid.cell_volume
            for a, b in zip(sols[:-1], sols[1:])
        ]
        ratios = [d1 / d2 for d1, d2 in zip(diffs[:-1], diffs[1:])]
        assert len(ratios) == 3
        for ratio in ratios:
            assert 1.5 <= ratio <= 2.5

    def test_records_requested_times_only(self):
        grid = GridSpec((8,), (4.0,), (0.0,))
        model = constant_coefficient_model(diffusion_value=0.01)
        gens = build_split_generators(model, grid)
        p0 = gaussian_density(grid, [2.0], [0.5])
        res = propagate(gens, p0, 1.0, 0.1, record_times=[0.3, 0.7])
        np.testing.assert_allclose(res.times, [0.3, 0.7], atol=1e-9)
