"""Numerical laboratory for semilinear shifted wave equations on hyperbolic space."""

__version__ = "0.1.0"

from .geometry import HyperbolicParams, RadialField, RadialGrid, StatePair, integrate_radial  # noqa: E402
from .operators import SobolevIndex, SpectralOperator, build_spectral, sobolev_norm  # noqa: E402
from .solver_hyperbolic import Profile, SimConfig, Trajectory, simulate, simulate_both_directions  # noqa: E402
from .solver_euclidean import DecayProfile, DecayingData, QuinticConfig, simulate_quintic  # noqa: E402
from .admissibility import PairQuery, is_compatible, is_control, is_sigma_admissible, min_sigma  # noqa: E402
from .inequality_lab import LemmaCheckReport, randomized_check  # noqa: E402

__all__ = [
    "HyperbolicParams", "RadialField", "RadialGrid", "StatePair", "integrate_radial",
    "SobolevIndex", "SpectralOperator", "build_spectral", "sobolev_norm",
    "Profile", "SimConfig", "Trajectory", "simulate", "simulate_both_directions",
    "DecayProfile", "DecayingData", "QuinticConfig", "simulate_quintic",
    "PairQuery", "is_compatible", "is_control", "is_sigma_admissible", "min_sigma",
    "LemmaCheckReport", "randomized_check",
]
