"""Policy-based optimization over mixed continuous/categorical search spaces."""
from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    NumericalFault,
    ParseError,
    PboError,
    UsageError,
)
from .pbo import PBO, OptimizationResult, PboConfig, run
from .policy import MixedAction, MixedSearchSpace, PolicyPair
from .tmm import MirrorProblem, SpectrumGrid, StackDesign

__version__ = "0.1.0"

__all__ = [
    "PBO", "PboConfig", "OptimizationResult", "run",
    "MixedAction", "MixedSearchSpace", "PolicyPair",
    "MirrorProblem", "SpectrumGrid", "StackDesign",
    "PboError", "ConfigurationError", "DimensionError", "DomainError", "NumericalFault",
    "ParseError", "UsageError",
]
