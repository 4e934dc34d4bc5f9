"""Error taxonomy shared by the library and the command line."""

from __future__ import annotations

__all__ = [
    "QuadVesdError",
    "InvalidInputError",
    "NumericalDegeneracyError",
    "PoleError",
    "UnsupportedOrderError",
    "GeometryError",
    "SolverStallError",
    "ZeroSignalError",
    "CellAbortedError",
]


class QuadVesdError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for this error."""

    exit_code = 1


class InvalidInputError(QuadVesdError, ValueError):
    exit_code = 2


class NumericalDegeneracyError(QuadVesdError, ArithmeticError):
    exit_code = 3


class PoleError(NumericalDegeneracyError):
    """Evaluation point collides with an eigenvalue."""


class UnsupportedOrderError(InvalidInputError):
    pass


class GeometryError(InvalidInputError):
    """Quadrature circle reaches another pole."""


class SolverStallError(QuadVesdError, RuntimeError):
    exit_code = 4

    def __init__(self, message: str, incumbent=None, objective: float | None = None):
        super().__init__(message)
        self.incumbent = incumbent
        self.objective = objective


class ZeroSignalError(QuadVesdError, ArithmeticError):
    exit_code = 5


class CellAbortedError(QuadVesdError, RuntimeError):
    """More than the tolerated share of replications failed."""

    exit_code = 3
