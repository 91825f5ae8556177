"""Spectral laboratory for MHD perturbations around a non-resonant background field."""

__version__ = "0.1.0"

from .spectral import (  # noqa: E402
    Lattice,
    PhysicalGrid,
    SpectralField,
    make_lattice,
    random_field,
    sobolev_norm,
    transform_to_physical,
    transform_to_spectral,
)
from .diophantine import BackgroundField, certify, estimate_constant, resolve_bfield  # noqa: E402
from .linear import Regime, evolve_linear, mode_propagator, theoretical_rate  # noqa: E402
from .solver import State, StepControl, InstabilityError, nonlinear_rhs, step  # noqa: E402
from .config import RunConfig, ConfigError, parse_config  # noqa: E402
from .runner import run, resume  # noqa: E402
