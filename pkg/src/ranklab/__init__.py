"""Empirical-Bayes ranking laboratory.

Priors and error models, quadrature posteriors, misranking losses, the
ranking estimators, a brute-force Bayes oracle and a Monte Carlo sweep
harness.
"""

from ._kernels import BACKEND
from .exceptions import (
    ConfigError,
    DegeneratePosteriorError,
    DomainError,
    IntegrationError,
    MomentUndefined,
    ParameterError,
    RanklabError,
    ShapeError,
    SizeLimitError,
    UnsupportedOperation,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "DegeneratePosteriorError",
    "DomainError",
    "IntegrationError",
    "MomentUndefined",
    "ParameterError",
    "RanklabError",
    "ShapeError",
    "SizeLimitError",
    "UnsupportedOperation",
    "__version__",
]
