"""Plotting for hybrid-system density dumps and filter estimate tables."""

__version__ = "0.1.0"

from .dgrd import Dump, read_dump
from .estimates import plot_estimates, read_table
from .panels import load_dumps, plot_density_panels, plot_mode_marginals
