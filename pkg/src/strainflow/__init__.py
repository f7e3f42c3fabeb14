"""Periodic-box pseudo-spectral flow solver and strain-tensor analysis."""

from . import (config, diagnostics, initial_data, numerics, snapshots, solver,
               spectral, sym3, toy_ode, verify)
from .exceptions import (ConfigError, ConstraintViolationError,
                         InstabilityError, InvalidExponentError,
                         InvalidInputError, NumericalFailureError,
                         StrainflowError)
from .spectral import Grid
from .sym3 import EigenTriple, TraceFreeSym3

__version__ = "0.1.0"

__all__ = [
    "Grid", "TraceFreeSym3", "EigenTriple",
    "config", "diagnostics", "initial_data", "numerics", "snapshots",
    "solver", "spectral", "sym3", "toy_ode", "verify",
    "StrainflowError", "InvalidInputError", "InvalidExponentError",
    "ConstraintViolationError", "NumericalFailureError", "InstabilityError",
    "ConfigError",
    "__version__",
]
