"""Circular distributions and statistics for angular state axes."""

from __future__ import annotations

import numpy as np
from scipy.special import i0e

from .errors import NumericalError

TWO_PI = 2.0 * np.pi

__all__ = ["von_mises_pdf", "wrap_angle", "mean_direction", "resultant_length", "circular_std"]


def von_mises_pdf(theta, mu: float, kappa: float):
    """Density ``exp(kappa cos(theta - mu)) / (2 pi I0(kappa))``.

    Evaluated through the exponentially scaled Bessel function so large
    concentrations do not overflow.
    """
    if kappa < 0:
        raise ValueError("concentration must be nonnegative")
    theta = np.asarray(theta, dtype=float)
    return np.exp(kappa * (np.cos(theta - mu) - 1.0)) / (TWO_PI * i0e(kappa))


def wrap_angle(theta, center: float = 0.0):
    """Wrap angles into ``[center - pi, center + pi)``."""
    theta = np.asarray(theta, dtype=float)
    return np.mod(theta - center + np.pi, TWO_PI) + center - np.pi


def resultant_length(theta, weights=None) -> float:
    """Mean resultant length of a (weighted) angular sample or density."""
    theta = np.asarray(theta, dtype=float)
    if weights is None:
        weights = np.full(theta.shape, 1.0 / theta.size)
    else:
        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
    z = np.sum(weights * np.exp(1j * theta))
    return float(np.abs(z))


def mean_direction(theta, weights=None) -> float:
    theta = np.asarray(theta, dtype=float)
    if weights is None:
        weights = np.full(theta.shape, 1.0 / theta.size)
    z = np.sum(np.asarray(weights, dtype=float) * np.exp(1j * theta))
    return float(np.angle(z))


def circular_std(rbar: float) -> float:
    """Mardia's circular standard deviation ``sqrt(-2 ln(rbar))``."""
    if rbar < 1e-12:
        raise NumericalError("mean resultant length too small for a circular deviation")
    return float(np.sqrt(-2.0 * np.log(min(rbar, 1.0))))
