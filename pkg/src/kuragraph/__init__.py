"""Kuramoto oscillators on graphons: kernel spectra, transition points,
finite-n simulation and a Fourier-Galerkin mean-field solver."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AssumptionsNotMet,
    ConfigError,
    InvalidArgument,
    NumericalFailure,
    UnsupportedOperation,
)
from .frequency import FrequencyDistribution, cauchy, gaussian, parse_frequency  # noqa: E402
from .graphon import Graphon, NodeGrid, make_grid, parse_graphon  # noqa: E402
from .spectra import (  # noqa: E402
    KernelSpectrum,
    TransitionPoints,
    analytic_spectrum,
    nystrom_spectrum,
    solve_eigenvalue,
    transition_points,
)
from .dynamics import InitialCondition, OscillatorState, SimConfig, integrate, order_parameter  # noqa: E402
from .meanfield import MeanFieldState, evolve, init_meanfield, linearized_evolve, stability_classify  # noqa: E402
