"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class CPBipolarError(Exception):
    """Base class for all package errors."""


class InvalidInput(CPBipolarError, ValueError):
    """Shapes, dimensions or structural preconditions are violated."""


class NumericalFailure(CPBipolarError, ArithmeticError):
    """An iterative routine did not converge within its iteration cap."""


class NotCompletelyPositive(CPBipolarError, ValueError):
    """A Choi matrix has an eigenvalue below the positivity tolerance."""


class InvalidCoefficients(CPBipolarError, ValueError):
    """A C*-coefficient family does not satisfy sum a_i^* a_i = I."""


class InconsistentOracle(CPBipolarError):
    """A pairing oracle gave answers that no linear map can produce."""


class ParseError(CPBipolarError, ValueError):
    """A serialized document is malformed.

    ``location`` is a JSON path (``$.choi.data[1]``) or ``line:col`` string.
    """

    def __init__(self, message: str, location: str = "$"):
        super().__init__(f"{location}: {message}")
        self.location = location


class ValidationError(CPBipolarError, ValueError):
    """A well-formed document decodes into an object that breaks an invariant."""
