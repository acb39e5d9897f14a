"""Exception hierarchy."""


class LogConcaveError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(LogConcaveError, ValueError):
    """Input outside the mathematical domain (non-finite, negative weight, ...)."""


class DegenerateDataError(LogConcaveError, ValueError):
    """Data cannot support a density fit (fewer than two distinct points, zero mass)."""


class NonConvergenceError(LogConcaveError, RuntimeError):
    """An iteration cap was hit. ``best`` holds the last iterate, ``trace`` any history."""

    def __init__(self, message, best=None, trace=None):
        super().__init__(message)
        self.best = best
        self.trace = trace


class ConditioningError(LogConcaveError, ArithmeticError):
    """The Newton system is numerically singular."""


class InvariantViolation(LogConcaveError, AssertionError):
    """An internal guarantee of the algorithm failed (e.g. EM ascent)."""
