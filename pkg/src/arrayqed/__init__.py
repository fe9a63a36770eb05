"""Impurity-pair frequency sensing in two-dimensional subwavelength atomic arrays."""

__version__ = "0.1.0"

from .errors import (ArrayQEDError, ConditioningError, ConfigError, GeometryError,  # noqa: E402
                     IntegrationError, OptimizationError, SingularityError, UnphysicalError)
from .geometry import Geometry, LatticeSpec, apply_disorder, build_lattice  # noqa: E402
from .effective_model import (EffectiveParams, build_bath, effective_params,  # noqa: E402
                              eliminate_momentum_space, eliminate_real_space)
from .dynamics import (evolve_2x2, evolve_full, peak_population, population_closed_form,  # noqa: E402
                       quasi_lorentzian, quasi_rabi)
from .sensing import minimize_sigma, population_derivative, sigma_signal  # noqa: E402

__all__ = [
    "ArrayQEDError", "ConditioningError", "ConfigError", "GeometryError", "IntegrationError",
    "OptimizationError", "SingularityError", "UnphysicalError",
    "Geometry", "LatticeSpec", "apply_disorder", "build_lattice",
    "EffectiveParams", "build_bath", "effective_params", "eliminate_momentum_space",
    "eliminate_real_space",
    "evolve_2x2", "evolve_full", "peak_population", "population_closed_form",
    "quasi_lorentzian", "quasi_rabi",
    "minimize_sigma", "population_derivative", "sigma_signal",
]
