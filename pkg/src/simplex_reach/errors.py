"""Exception hierarchy shared by all modules."""


class SimplexReachError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(SimplexReachError, ValueError):
    pass


class RegimeError(InvalidInputError):
    """Input is valid in general but not for the requested temperature regime."""


class DegenerateGeneratorError(SimplexReachError):
    """The generator has no unique fixed point."""


class NumericalFailure(SimplexReachError, ArithmeticError):
    """A numerical result left its admissible set by more than roundoff."""


class SizeError(InvalidInputError):
    pass


class SolverError(NumericalFailure):
    """The LP solver did not terminate cleanly; ``residuals`` holds diagnostics."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class MajorisationViolation(SimplexReachError):
    """A majorisation property expected to hold failed numerically."""
