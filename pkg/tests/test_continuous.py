"""Spectral generator of the drift-diffusion stage."""

import dataclasses

import numpy as np
import pytest

from gshs.continuous import build_generator, propagate_continuous
from gshs.errors import NumericalError
from gshs.grid import DensityGrid, GridSpec, dft, idft
from tests.conftest import constant_coefficient_model, gaussian_density


def sine_drift_model(L):
    def drift(t, r, s):
        return np.sin(2 * np.pi * r / L)

    return dataclasses.replace(constant_coefficient_model(), drift=drift)


def brute_force_1d_matrix(grid, a_samples, d_samples):
    """Direct double loop: row/column frequencies, coefficients by direct sums."""
    N = grid.counts[0]
    L = grid.lengths[0]
    rel = np.arange(N) / N
    freqs = grid.frequencies(0)

    def fhat(samples, n):
        return (samples * np.exp(-2j * np.pi * n * rel)).sum() / N

    A = np.zeros((N, N), dtype=complex)
    for i, j in enumerate(freqs):
        cj = 0.0 if j == -(N // 2) else 1.0
        for k_idx, k in enumerate(freqs):
            m = j - k
            # wrap into the stored frequency window by N-periodicity
            while m < -(N // 2):
                m += N
            while m > N // 2 - 1:
                m -= N
            A[i, k_idx] = (
                -(2j * np.pi * j * cj / L) * fhat(a_samples, m)
                - (4 * np.pi**2 * j**2 / L**2) * fhat(d_samples, m)
            )
    return A


class TestBuildGenerator:
    def test_pure_diffusion_diagonal(self):
        L, N, D0 = 4.0, 8, 0.3
        grid = GridSpec((N,), (L,), (0.0,))
        model = constant_coefficient_model(diffusion_value=D0)
        gen = build_generator(model, grid, 0)
        dense = gen.matrix.toarray()
        freqs = grid.frequencies(0)
        expected = np.diag(-4 * np.pi**2 * freqs.astype(float) ** 2 * D0 / L**2)
        np.testing.assert_allclose(dense, expected, atol=1e-12)

    def test_constant_drift_diagonal(self):
        L, N, a0 = 2.0, 8, 1.7
        grid = GridSpec((N,), (L,), (-1.0,))
        model = constant_coefficient_model(drift_value=a0)
        gen = build_generator(model, grid, 0)
        dense = gen.matrix.toarray()
        freqs = grid.frequencies(0)
        gate = grid.first_derivative_gate(0)
        expected = np.diag(-2j * np.pi * freqs * gate * a0 / L)
        np.testing.assert_allclose(dense, expected, atol=1e-12)
        # the unmatched -N/2 frequency row carries no first-derivative term
        assert dense[N // 2, N // 2] == 0.0

    def test_sine_drift_matches_brute_force(self):
        L, N = 2.0, 8
        grid = GridSpec((N,), (L,), (0.0,))
        model = sine_drift_model(L)
        gen = build_generator(model, grid, 0)
        r = grid.axis_points(0)
        ref = brute_force_1d_matrix(grid, np.sin(2 * np.pi * r / L), np.zeros(N))
        np.testing.assert_allclose(gen.matrix.toarray(), ref, atol=1e-12)

    def test_zero_frequency_row_vanishes(self, rng):
        grid = GridSpec((8, 8), (3.0, 2.0), (0.0, 0.0))

        def drift(t, r, s):
            return np.stack([np.sin(2 * np.pi * r[:, 0] / 3.0), np.cos(2 * np.pi * r[:, 1] / 2.0)], axis=-1)

        def diffusion(t, r, s):
            out = np.zeros((r.shape[0], 2, 1))
            out[:, 0, 0] = 0.2 + 0.1 * np.cos(2 * np.pi * r[:, 0] / 3.0)
            out[:, 1, 0] = 0.3
            return out

        model = dataclasses.replace(
            constant_coefficient_model(num_axes=2), drift=drift, diffusion=diffusion
        )
        gen = build_generator(model, grid, 0)
        row = np.abs(gen.matrix.toarray()[0])
        assert row.max() == 0.0

    def test_nonfinite_field_raises(self):
        grid = GridSpec((8,), (1.0,), (0.0,))
        model = dataclasses.replace(
            constant_coefficient_model(), drift=lambda t, r, s: np.full_like(r, np.nan)
        )
        with pytest.raises(NumericalError):
            build_generator(model, grid, 0)


class TestPropagate:
    def test_zero_generator_is_identity(self, rng):
        grid = GridSpec((16,), (2.0,), (0.0,))
        model = constant_coefficient_model()
        gen = build_generator(model, grid, 0)
        f = dft(DensityGrid(grid, rng.random((1, 16))))
        out = propagate_continuous(gen, f, 0, 0.7)
        np.testing.assert_allclose(out.coeffs, f.coeffs, atol=1e-14)

    def test_heat_kernel(self):
        D0, L, N = 0.05, 20.0, 128
        grid = GridSpec((N,), (L,), (-L / 2,))
        model = constant_coefficient_model(diffusion_value=D0)
        gen = build_generator(model, grid, 0)
        p0 = gaussian_density(grid, [0.0], [0.5])
        out = idft(propagate_continuous(gen, dft(p0), 0, 1.0))
        x = grid.axis_points(0)
        var = 0.5**2 + 2 * D0
        exact = np.exp(-(x**2) / (2 * var)) / np.sqrt(2 * np.pi * var)
        assert np.abs(out.values[0] - exact).max() < 1e-3

    def test_advected_heat_kernel(self):
        a0, D0, L, N = 1.0, 0.01, 20.0, 128
        grid = GridSpec((N,), (L,), (-L / 2,))
        model = constant_coefficient_model(drift_value=a0, diffusion_value=D0)
        gen = build_generator(model, grid, 0)
        p0 = gaussian_density(grid, [0.0], [0.5])
        out = idft(propagate_continuous(gen, dft(p0), 0, 0.5))
        x = grid.axis_points(0)
        var = 0.5**2 + 2 * D0 * 0.5
        exact = np.exp(-((x - 0.5) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)
        assert np.abs(out.values[0] - exact).max() < 1e-3

    def test_2d_cross_diffusion_gaussian(self):
        # constant anisotropic D with off-diagonal coupling: solution stays
        # Gaussian with covariance Sigma0 + 2 D t
        grid = GridSpec((64, 64), (16.0, 16.0), (-8.0, -8.0))
        Dmat = np.array([[0.04, 0.02], [0.02, 0.05]])
        b = np.linalg.cholesky(2 * Dmat)

        def diffusion(t, r, s):
            return np.broadcast_to(b, (r.shape[0], 2, 2))

        model = dataclasses.replace(
            constant_coefficient_model(num_axes=2), diffusion=diffusion, noise_dim=2
        )
        gen = build_generator(model, grid, 0)
        p0 = gaussian_density(grid, [0.0, 0.0], [0.6, 0.8])
        out = idft(propagate_continuous(gen, dft(p0), 0, 2.0))
        cov = np.diag([0.36, 0.64]) + 2 * Dmat * 2.0
        pts = grid.points
        inv = np.linalg.inv(cov)
        quad = np.einsum("mi,ij,mj->m", pts, inv, pts)
        exact = np.exp(-0.5 * quad) / (2 * np.pi * np.sqrt(np.linalg.det(cov)))
        assert np.abs(out.values[0] - exact).max() < 1e-3

    def test_zero_mode_conserved(self, rng):
        grid = GridSpec((32,), (5.0,), (0.0,))
        model = dataclasses.replace(
            sine_drift_model(5.0),
            diffusion=lambda t, r, s: (0.1 + 0.05 * np.cos(2 * np.pi * r / 5.0))[:, :, None],
        )
        gen = build_generator(model, grid, 0)
        f = dft(DensityGrid(grid, rng.random((1, 32))).normalized())
        out = propagate_continuous(gen, f, 0, 0.3)
        assert abs(out.coeffs[0, 0] - f.coeffs[0, 0]) <= 1e-12 * abs(f.coeffs[0, 0])

    def test_realness_preserved(self, rng):
        grid = GridSpec((32,), (5.0,), (0.0,))
        model = sine_drift_model(5.0)
        gen = build_generator(model, grid, 0)
        f = dft(DensityGrid(grid, rng.random((1, 32))))
        out = idft(propagate_continuous(gen, f, 0, 0.2), max_imag=1e-10)
        assert np.all(np.isfinite(out.values))

    def test_generator_consistency_with_finite_differences(self):
        # spectral right-hand side vs 4th-order central differences of
        # -(a p)' + (D p)'' for smooth periodic fields
        L, N = 2 * np.pi, 64
        grid = GridSpec((N,), (L,), (0.0,))
        r = grid.axis_points(0)
        a = np.sin(r)
        Dfield = 0.1 + 0.05 * np.cos(r)

        def drift(t, rr, s):
            return np.sin(rr)

        def diffusion(t, rr, s):
            return np.sqrt(2 * (0.1 + 0.05 * np.cos(rr)))[:, :, None]

        model = dataclasses.replace(constant_coefficient_model(), drift=drift, diffusion=diffusion)
        gen = build_generator(model, grid, 0)
        p = np.exp(np.cos(r - 1.0))
        from gshs.grid import SpectralDensity

        coeffs = gen.apply(dft(DensityGrid(grid, p[None, :])).coeffs[0])
        rhs_spec = idft(SpectralDensity(grid, coeffs[None, :]), max_imag=1e-6).values[0]

        h = grid.steps[0]

        def d1(f):
            return (-np.roll(f, -2) + 8 * np.roll(f, -1) - 8 * np.roll(f, 1) + np.roll(f, 2)) / (12 * h)

        def d2(f):
            return (
                -np.roll(f, -2) + 16 * np.roll(f, -1) - 30 * f + 16 * np.roll(f, 1) - np.roll(f, 2)
            ) / (12 * h**2)

        rhs_fd = -d1(a * p) + d2(Dfield * p)
        rel = np.linalg.norm(rhs_spec - rhs_fd) / np.linalg.norm(rhs_fd)
        assert rel < 1e-3

    def test_time_variant_rk4(self):
        # spatially constant drift a(t) = a0 (1 + t): coefficients rotate by
        # the integrated drift, solvable in closed form
        L, N, a0 = 4.0, 16, 0.8
        grid = GridSpec((N,), (L,), (0.0,))

        def drift(t, r, s):
            return np.full_like(r, a0 * (1.0 + t))

        model = dataclasses.replace(
            constant_coefficient_model(), drift=drift, time_invariant=False
        )
        gen = build_generator(model, grid, 0, t=0.0)
        p0 = gaussian_density(grid, [2.0], [0.3])
        f0 = dft(p0)
        dt = 0.5
        out = propagate_continuous(gen, f0, 0, dt, t0=0.0, substeps=64)
        shift = a0 * (dt + dt**2 / 2.0)
        freqs = grid.frequencies(0)
        gate = grid.first_derivative_gate(0)
        expected = f0.coeffs[0] * np.exp(-2j * np.pi * freqs * gate * shift / L)
        np.testing.assert_allclose(out.coeffs[0], expected, atol=1e-8)

    def test_rejects_wrong_mode_and_dt(self):
        grid = GridSpec((8,), (1.0,), (0.0,))
        model = constant_coefficient_model()
        gen = build_generator(model, grid, 0)
        f = dft(DensityGrid(grid, np.ones((1, 8))))
        with pytest.raises(ValueError):
            propagate_continuous(gen, f, 0, -0.1)
        with pytest.raises(ValueError):
            propagate_continuous(gen, f, 1, 0.1)
