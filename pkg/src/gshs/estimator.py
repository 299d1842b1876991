"""Bayesian correction, point estimation, and the grid filtering loop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .circular import circular_std, mean_direction, resultant_length
from .errors import NumericalError
from .grid import DensityGrid, PeakFractionThreshold, threshold_renormalize
from .model import GshsModel, HybridState
from .splitting import SplitGenerators, split_step

__all__ = ["EstimateReport", "correct", "point_estimates", "run_filter", "FilterResult"]

POSTERIOR_PEAK_FRACTION = 1.0 / 40.0


@dataclass(frozen=True)
class EstimateReport:
    """Point estimates distilled from one density.

    ``mean`` holds the expected value per axis, with angular axes carrying the
    mean direction instead; ``std`` is the per-axis standard deviation, the
    circular one (``sqrt(-2 ln rbar)``) on angular axes.  ``mean_direction``
    repeats the angular entries and is NaN elsewhere.
    """

    time: float
    mean: np.ndarray
    std: np.ndarray
    mean_direction: np.ndarray
    map_state: HybridState
    mode_marginal: np.ndarray


def correct(
    prior: DensityGrid,
    z,
    model: GshsModel,
    peak_fraction: float = POSTERIOR_PEAK_FRACTION,
) -> DensityGrid:
    """Multiply the prior by the measurement likelihood and renormalize.

    The posterior is invariant under positive rescaling of the likelihood.
    After normalization, densities below ``peak_fraction`` of the posterior
    peak are zeroed to suppress ripples amplified by the multiplication.
    """
    if model.likelihood is None:
        raise ValueError("model carries no measurement likelihood")
    grid = prior.grid
    pts = grid.points
    weights = np.stack(
        [np.asarray(model.likelihood(z, pts, s), dtype=float) for s in range(model.num_modes)]
    )
    if not np.all(np.isfinite(weights)) or weights.min() < 0:
        raise NumericalError("likelihood produced invalid values on the grid")
    peak = weights.max()
    if not peak > 0.0:
        raise NumericalError("measurement is incompatible with the prior support")
    # dividing by the peak makes the posterior depend on likelihood ratios only,
    # so any positive rescaling of the likelihood cancels exactly
    unnorm = (weights / peak) * prior.values
    total = unnorm.sum() * grid.cell_volume
    if not total > 0.0:
        raise NumericalError("measurement is incompatible with the prior support")
    posterior = DensityGrid(grid, unnorm / total, prior.time)
    return threshold_renormalize(posterior, PeakFractionThreshold(peak_fraction))


def point_estimates(
    p: DensityGrid, angular_axes: Sequence[int] = (), strict_circular: bool = True
) -> EstimateReport:
    """Mean/MAP/mode summaries of a normalized density.

    The MAP state is the grid argmax over modes and points, ties broken by the
    lowest linear index of the stacked value array.  A degenerate angular
    marginal (mean resultant length below 1e-12, the direction undefined)
    raises; with ``strict_circular=False`` it instead reports direction 0.0
    and an infinite circular deviation, which the filter loop needs while the
    heading is still uniform.
    """
    grid = p.grid
    pts = grid.points
    dv = grid.cell_volume
    angular = set(int(k) for k in angular_axes)
    point_mass = p.values.sum(axis=0) * dv           # marginal probability per grid point
    mode_marginal = p.values.sum(axis=1) * dv

    mean = np.zeros(grid.num_axes)
    std = np.zeros(grid.num_axes)
    mdir = np.full(grid.num_axes, np.nan)
    for k in range(grid.num_axes):
        x = pts[:, k]
        if k in angular:
            rbar = resultant_length(x, point_mass)
            if rbar < 1e-12 and not strict_circular:
                mdir[k] = 0.0
                mean[k] = 0.0
                std[k] = np.inf
                continue
            mdir[k] = mean_direction(x, point_mass)
            mean[k] = mdir[k]
            std[k] = circular_std(rbar)
        else:
            m = float(np.dot(point_mass, x))
            var = float(np.dot(point_mass, (x - m) ** 2))
            mean[k] = m
            std[k] = np.sqrt(max(var, 0.0))

    flat = int(np.argmax(p.values))
    s_map, j_map = divmod(flat, grid.num_points)
    return EstimateReport(
        time=p.time,
        mean=mean,
        std=std,
        mean_direction=mdir,
        map_state=HybridState(pts[j_map], s_map),
        mode_marginal=mode_marginal,
    )


@dataclass
class FilterResult:
    times: np.ndarray
    estimates: list[EstimateReport]
    posteriors: list[DensityGrid]      # at the requested record times
    final: DensityGrid


def run_filter(
    gens: SplitGenerators,
    p0: DensityGrid,
    measurements: Sequence[tuple[float, object]],
    dt: float,
    horizon: Optional[float] = None,
    propagation_threshold=PeakFractionThreshold(POSTERIOR_PEAK_FRACTION),
    peak_fraction: float = POSTERIOR_PEAK_FRACTION,
    record_times: Sequence[float] = (),
) -> FilterResult:
    """Alternate propagation and correction; estimates are emitted every step.

    Measurement times must align with step boundaries.  Between measurements
    the density is propagated with the (estimation-mode) threshold policy;
    at a measurement time the propagated prior is corrected first and the
    estimate is computed from the posterior.
    """
    model = gens.model
    meas = sorted(measurements, key=lambda tz: tz[0])
    if horizon is None:
        if not meas:
            raise ValueError("need measurements or an explicit horizon")
        horizon = meas[-1][0] - p0.time
    steps_f = horizon / dt
    steps = int(round(steps_f))
    if abs(steps_f - steps) > 1e-9:
        raise ValueError(f"horizon {horizon} is not an integer multiple of dt {dt}")

    by_step: dict[int, object] = {}
    for t_k, z in meas:
        k_f = (t_k - p0.time) / dt
        k = int(round(k_f))
        if abs(k_f - k) > 1e-6 or not 1 <= k <= steps:
            raise ValueError(f"measurement time {t_k} does not align with the step grid")
        by_step[k] = z

    tol = dt * 1e-6
    p = p0.copy()
    times, estimates, posteriors = [], [], []
    if any(abs(p.time - w) <= tol for w in record_times):
        posteriors.append(p.copy())
    for k in range(1, steps + 1):
        t_prev = p0.time + (k - 1) * dt
        p = split_step(gens, p, dt, t_prev)
        if propagation_threshold is not None:
            p = threshold_renormalize(p, propagation_threshold)
        if k in by_step:
            p = correct(p, by_step[k], model, peak_fraction)
        times.append(p.time)
        estimates.append(point_estimates(p, model.angular_axes, strict_circular=False))
        if any(abs(p.time - w) <= tol for w in record_times):
            posteriors.append(p.copy())
    return FilterResult(np.asarray(times), estimates, posteriors, p)
