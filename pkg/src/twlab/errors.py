"""Exception hierarchy shared by every module."""
from __future__ import annotations

__all__ = [
    "TwlabError",
    "DomainError",
    "RangeError",
    "AccuracyError",
    "ConditioningError",
    "DataError",
    "NoiseGateError",
    "UnsupportedError",
    "ValidationError",
]


class TwlabError(Exception):
    """Base class for package errors."""


class DomainError(TwlabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(TwlabError, ValueError):
    """An argument lies outside the window where accuracy is certified."""


class AccuracyError(TwlabError, ArithmeticError):
    """A numerical routine failed to reach its requested tolerance.

    Attributes
    ----------
    achieved : float
        Best error estimate that was reached.
    """

    def __init__(self, message: str, achieved: float = float("nan")):
        super().__init__(message)
        self.achieved = achieved


class ConditioningError(TwlabError, ArithmeticError):
    """A linear solve is too ill-conditioned to be trusted."""


class DataError(TwlabError, ValueError):
    """Input data contain non-finite values or have the wrong shape."""


class NoiseGateError(TwlabError, RuntimeError):
    """Monte Carlo noise is too large for the requested estimate."""


class UnsupportedError(TwlabError, NotImplementedError):
    """A valid but unimplemented case was requested."""


class ValidationError(TwlabError, ValueError):
    """A structured input object is malformed."""
