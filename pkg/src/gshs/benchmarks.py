"""The two built-in benchmark systems: bouncing ball and Dubins vehicle.

Both follow their standard published parameterizations: the ball falls under
gravity with velocity-dependent drag noise and bounces through a restitution
kernel approximating the ground guard by a large jump rate; the vehicle moves
at constant speed with a noisy turning rate and switches between forward /
turn-left / turn-right modes to avoid circular obstacle regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import i0e

from .circular import TWO_PI, von_mises_pdf, wrap_angle
from .grid import DensityGrid, GridSpec
from .model import GridDeltaKernel, GshsModel, SwitchingKernel

__all__ = [
    "BouncingBallParams",
    "DubinsParams",
    "ball_grid",
    "dubins_grid",
    "bouncing_ball_model",
    "dubins_model",
    "build_model",
    "MODEL_NAMES",
    "von_mises_pdf",
]

_ALIGN_TOL = 1e-9  # absorbs float rounding when grid points sit exactly on a case boundary


@dataclass(frozen=True)
class BouncingBallParams:
    g: float = 9.8          # m/s^2
    nu: float = 0.05        # 1/m, drag coefficient
    sigma_v: float = 0.01   # sqrt(s)/m, drag noise strength
    c: float = 0.95         # restitution coefficient
    sigma_c: float = 0.5    # m/s, post-bounce velocity noise
    sigma_m: float = 0.3    # m, height measurement noise

    def __post_init__(self):
        if min(self.g, self.nu, self.sigma_v, self.sigma_c, self.sigma_m) <= 0:
            raise ValueError("bouncing-ball parameters must be positive")
        if not 0.0 < self.c <= 1.0:
            raise ValueError("restitution coefficient must lie in (0, 1]")


@dataclass(frozen=True)
class DubinsParams:
    v: float = 1.0            # m/s, forward speed
    a: float = 2.0            # rad/s, turning rate magnitude
    sigma_u: float = 0.2      # rad/sqrt(s), turning noise
    obstacles: tuple = ((0.0, 0.0), (1.0, -1.5), (1.0, 1.5))
    d: float = 0.5            # m, obstacle trigger radius
    sigma_l: float = 0.5      # m, lidar range noise
    kappa_l: float = 30.0     # lidar bearing concentration
    lidar: tuple = (0.0, -3.0)

    def __post_init__(self):
        if min(self.v, self.a, self.sigma_u, self.d, self.sigma_l) <= 0 or self.kappa_l <= 0:
            raise ValueError("dubins parameters must be positive")


def ball_grid(counts: tuple[int, int] = (100, 100)) -> GridSpec:
    """Height/velocity box [-2.5, 2.5] x [-8, 8]."""
    return GridSpec(counts, (5.0, 16.0), (-2.5, -8.0), mode_count=1)


def dubins_grid(counts: tuple[int, int, int] = (100, 100, 50)) -> GridSpec:
    """Position/heading box [-3, 3]^2 x [0, 2 pi) with three modes."""
    return GridSpec(counts, (6.0, 6.0, TWO_PI), (-3.0, -3.0, 0.0), mode_count=3)


def _normal_pdf(x, mu, sigma):
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (math.sqrt(2.0 * math.pi) * sigma)


def _product_density(grid: GridSpec, factors, mode_weights) -> DensityGrid:
    """Grid-sampled product of per-axis densities times a mode distribution."""
    cube = np.ones(grid.counts)
    for k, f in enumerate(factors):
        shape = [1] * grid.num_axes
        shape[k] = grid.counts[k]
        cube = cube * f(grid.axis_points(k)).reshape(shape)
    values = np.asarray(mode_weights, dtype=float)[:, None] * cube.ravel()[None, :]
    return DensityGrid(grid, values).normalized()


def _uniform_density(grid: GridSpec, point_mask=None) -> DensityGrid:
    values = np.ones((grid.mode_count, grid.num_points))
    if point_mask is not None:
        values *= point_mask[None, :]
    return DensityGrid(grid, values).normalized()


def bouncing_ball_model(
    params: BouncingBallParams = BouncingBallParams(),
    grid: GridSpec | None = None,
    initial: str = "propagation",
) -> GshsModel:
    """Single-mode ball with state (height, velocity)."""
    p = params
    if grid is None:
        grid = ball_grid()

    def drift(t, r, s):
        y, v = r[:, 0], r[:, 1]
        return np.stack([v, -p.g - p.nu * v * np.abs(v)], axis=-1)

    def diffusion(t, r, s):
        v = r[:, 1]
        out = np.zeros((r.shape[0], 2, 1))
        out[:, 1, 0] = p.sigma_v * v**2
        return out

    def rate(r, s):
        y, v = r[:, 0], r[:, 1]
        falling = v < -_ALIGN_TOL
        below = y < -_ALIGN_TOL
        at_ground = np.abs(y) <= _ALIGN_TOL
        return np.where(falling & below, 100.0, np.where(falling & at_ground, 30.0, 0.0))

    def reset_map(r):
        return np.abs(r[:, :1])

    def factor_density(r_src, w):
        mu = -p.c * r_src[:, 1]
        return _normal_pdf(w[None, :, 0], mu[:, None], p.sigma_c)

    def factor_sampler(rng, r_src):
        mu = -p.c * r_src[:, 1]
        return (mu + p.sigma_c * rng.standard_normal(r_src.shape[0]))[:, None]

    def likelihood(z, r, s):
        return _normal_pdf(r[:, 0], float(np.asarray(z).reshape(())), p.sigma_m)

    def measurement_sampler(rng, r, s):
        return float(r[0] + p.sigma_m * rng.standard_normal())

    def initial_sampler(rng, n):
        r = np.stack(
            [rng.normal(1.5, 0.2, size=n), rng.normal(0.0, 0.5, size=n)], axis=-1
        )
        return r, np.zeros(n, dtype=np.int64)

    if initial == "propagation":
        init = _product_density(
            grid,
            [lambda y: _normal_pdf(y, 1.5, 0.2), lambda v: _normal_pdf(v, 0.0, 0.5)],
            [1.0],
        )
    elif initial == "uniform":
        init = _uniform_density(grid, point_mask=(grid.points[:, 0] >= -_ALIGN_TOL).astype(float))
    else:
        raise ValueError(f"unknown initial distribution {initial!r}")

    return GshsModel(
        num_axes=2,
        num_modes=1,
        noise_dim=1,
        drift=drift,
        diffusion=diffusion,
        rate=rate,
        kernel=GridDeltaKernel((0,), reset_map, factor_density, factor_sampler),
        initial_density=init,
        likelihood=likelihood,
        initial_sampler=initial_sampler,
        measurement_sampler=measurement_sampler,
        measurement_state_axes=(0,),
        name="bouncing-ball",
    )


def dubins_model(
    params: DubinsParams = DubinsParams(),
    grid: GridSpec | None = None,
    initial: str = "propagation",
) -> GshsModel:
    """Three-mode vehicle with state (y1, y2, heading); the heading axis is circular."""
    p = params
    if grid is None:
        grid = dubins_grid()
    obstacles = np.asarray(p.obstacles, dtype=float)
    lidar = np.asarray(p.lidar, dtype=float)
    turn_rates = np.array([0.0, p.a, -p.a])

    def _obstacle_geometry(r):
        diffs = obstacles[None, :, :] - r[:, None, :2]
        dists = np.hypot(diffs[..., 0], diffs[..., 1])
        nearest = np.argmin(dists, axis=1)
        return dists.min(axis=1), nearest, diffs

    def drift(t, r, s):
        theta = r[:, 2]
        return np.stack(
            [p.v * np.cos(theta), p.v * np.sin(theta), np.full(r.shape[0], turn_rates[s])],
            axis=-1,
        )

    def diffusion(t, r, s):
        out = np.zeros((r.shape[0], 3, 1))
        out[:, 2, 0] = p.sigma_u
        return out

    def rate(r, s):
        dmin, _, _ = _obstacle_geometry(r)
        if s == 0:
            ramp = 50.0 * np.sin((p.d - dmin) / 0.4 * (np.pi / 2.0))
            return np.where(dmin < 0.1, 50.0, np.where(dmin < p.d, ramp, 0.0))
        ramp = 50.0 * np.sin((dmin - p.d) / 0.4 * (np.pi / 2.0))
        return np.where(dmin <= p.d, 0.0, np.where(dmin <= 0.9, ramp, 50.0))

    def mode_probs(r, s_from):
        n = r.shape[0]
        probs = np.zeros((n, 3))
        if s_from in (1, 2):
            probs[:, 0] = 1.0
            return probs
        _, nearest, diffs = _obstacle_geometry(r)
        toward = diffs[np.arange(n), nearest]
        theta_o = np.arctan2(toward[:, 1], toward[:, 0])
        delta = wrap_angle(theta_o - r[:, 2])
        probs[delta < 0, 1] = 1.0   # obstacle on the right of the heading: turn left
        probs[delta >= 0, 2] = 1.0  # obstacle on the left (or dead ahead): turn right
        return probs

    lidar_norm = 1.0 / ((2.0 * np.pi) ** 1.5 * p.sigma_l * i0e(p.kappa_l))

    def likelihood(z, r, s):
        d_l, theta_l = float(z[0]), float(z[1])
        dx = r[:, 0] - lidar[0]
        dy = r[:, 1] - lidar[1]
        d_hat = np.hypot(dx, dy)
        theta_hat = np.arctan2(dy, dx)
        return lidar_norm * np.exp(
            -0.5 * ((d_l - d_hat) / p.sigma_l) ** 2
            + p.kappa_l * (np.cos(theta_l - theta_hat) - 1.0)
        )

    def measurement_sampler(rng, r, s):
        dx, dy = r[0] - lidar[0], r[1] - lidar[1]
        d_l = np.hypot(dx, dy) + p.sigma_l * rng.standard_normal()
        theta_l = np.arctan2(dy, dx) + rng.vonmises(0.0, p.kappa_l)
        return np.array([d_l, theta_l])

    def initial_sampler(rng, n):
        r = np.stack(
            [
                rng.normal(0.0, 0.2, size=n),
                rng.normal(-2.0, 0.2, size=n),
                np.mod(rng.vonmises(np.pi / 2.0, 20.0, size=n), TWO_PI),
            ],
            axis=-1,
        )
        return r, np.zeros(n, dtype=np.int64)

    if initial == "propagation":
        init = _product_density(
            grid,
            [
                lambda y1: _normal_pdf(y1, 0.0, 0.2),
                lambda y2: _normal_pdf(y2, -2.0, 0.2),
                lambda th: von_mises_pdf(th, np.pi / 2.0, 20.0),
            ],
            [1.0, 0.0, 0.0],
        )
    elif initial == "uniform":
        init = _uniform_density(grid)
    else:
        raise ValueError(f"unknown initial distribution {initial!r}")

    def turn_radius_check(model, g, report):
        if p.v / p.a > p.d:
            report.warnings.append(
                f"turn radius {p.v / p.a:.3f} exceeds the obstacle trigger radius {p.d:.3f}"
            )

    return GshsModel(
        num_axes=3,
        num_modes=3,
        noise_dim=1,
        drift=drift,
        diffusion=diffusion,
        rate=rate,
        kernel=SwitchingKernel(mode_probs),
        initial_density=init,
        likelihood=likelihood,
        angular_axes=(2,),
        initial_sampler=initial_sampler,
        measurement_sampler=measurement_sampler,
        extra_checks=[turn_radius_check],
        name="dubins",
    )


MODEL_NAMES = ("bouncing-ball", "dubins")


def build_model(name: str, grid: GridSpec | None = None, params: dict | None = None, initial: str = "propagation") -> GshsModel:
    """Instantiate a registered model, optionally overriding parameter fields."""
    if name == "bouncing-ball":
        base = BouncingBallParams()
        if params:
            base = replace(base, **params)
        return bouncing_ball_model(base, grid, initial)
    if name == "dubins":
        base = DubinsParams()
        if params:
            if "obstacles" in params:
                params = dict(params)
                params["obstacles"] = tuple(tuple(o) for o in params["obstacles"])
            if "lidar" in params:
                params = dict(params)
                params["lidar"] = tuple(params["lidar"])
            base = replace(base, **params)
        return dubins_model(base, grid, initial)
    raise ValueError(f"unknown model {name!r}")


def default_grid(name: str) -> GridSpec:
    if name == "bouncing-ball":
        return ball_grid()
    if name == "dubins":
        return dubins_grid()
    raise ValueError(f"unknown model {name!r}")
