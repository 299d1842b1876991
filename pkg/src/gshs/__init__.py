"""Density propagation and Bayesian estimation for general stochastic hybrid systems.

The continuous drift-diffusion part of the density evolution is solved
spectrally (Fourier coefficients advance through a linear ODE), the jump part
through a quadrature-discretized linear ODE on grid values, and the two are
combined by Lie splitting.  Grid-based Bayesian correction, a Monte Carlo
sample-path oracle, and an SIR particle filter baseline round out the toolkit.
"""

__version__ = "0.1.0"

from .errors import NumericalError
from .grid import (
    AbsoluteThreshold,
    DensityGrid,
    GridSpec,
    PeakFractionThreshold,
    SpectralDensity,
    dft,
    evaluate_between_grid,
    idft,
    threshold_renormalize,
)
from .model import (
    Execution,
    GeneralKernel,
    GridDeltaKernel,
    GshsModel,
    HybridState,
    SwitchingKernel,
    diffusion_matrix,
    validate,
)
from .continuous import ContinuousGenerator, build_generator, propagate_continuous
from .jump import build_jump_generator, propagate_jump
from .splitting import build_split_generators, propagate, split_step
from .estimator import EstimateReport, correct, point_estimates, run_filter
from .montecarlo import histogram_density, sample_path, simulate_ensemble
from .particle import ParticleEnsemble, pf_density, pf_step, systematic_resample
from .benchmarks import (
    BouncingBallParams,
    DubinsParams,
    ball_grid,
    bouncing_ball_model,
    build_model,
    dubins_grid,
    dubins_model,
    von_mises_pdf,
)

__all__ = [name for name in dir() if not name.startswith("_")]
