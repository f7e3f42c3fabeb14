"""Exception hierarchy shared across the package."""


class StrainflowError(Exception):
    """Base class for all errors raised by strainflow."""


class InvalidInputError(StrainflowError):
    """Arguments violate a documented precondition (non-finite entries,
    non-unit direction vectors, out-of-range exponents, bad grid sizes)."""


class InvalidExponentError(InvalidInputError):
    """Integrability exponent outside the admissible range."""


class ConstraintViolationError(StrainflowError):
    """A tensor field does not satisfy the strain constraint equation."""


class NumericalFailureError(StrainflowError):
    """Numerical breakdown (NaN/Inf state, step-size underflow).

    Carries whatever partial results were available so callers can report
    the last stable time.
    """

    def __init__(self, message, last_state=None, trajectory=None):
        super().__init__(message)
        self.last_state = last_state
        self.trajectory = trajectory


class InstabilityError(NumericalFailureError):
    """The flow solver produced a non-finite state (blow-up or instability)."""


class ConfigError(StrainflowError):
    """Malformed configuration file, CLI arguments, or snapshot header."""
