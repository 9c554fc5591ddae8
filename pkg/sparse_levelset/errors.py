"""Exception hierarchy shared by the solver modules."""
from typing import Optional

import numpy as np


class LevelSetError(Exception):
    """Base class for every error raised by sparse_levelset."""


class DomainError(LevelSetError, ValueError):
    """An argument lies outside the domain of an operation."""


class DimensionMismatchError(DomainError):
    pass


class ConfigError(DomainError):
    pass


class ProblemFormatError(DomainError):
    """A problem file could not be parsed."""


class RankDeficiencyError(LevelSetError):
    """The Gram matrix D D^T is numerically singular."""


class NumericalFailureError(LevelSetError):
    """A loss, gradient or frontier value became non-finite.

    The offending iterate is kept on the exception so callers can inspect it.
    """

    def __init__(self, message: str, iterate: Optional[np.ndarray] = None):
        super().__init__(message)
        self.iterate = iterate


class NewtonStallError(NumericalFailureError):
    pass


class BracketError(LevelSetError):
    """Endpoint values do not have opposite signs."""


class InvariantViolationError(LevelSetError):
    pass


class UnsupportedModelError(LevelSetError):
    pass


class ZeroSolutionSignal(Exception):
    """Raised when x = 0 already satisfies the misfit constraint."""

    def __init__(self, rho_y: float, sigma: float):
        super().__init__(f"rho(y) = {rho_y:.6g} <= sigma = {sigma:.6g}; x = 0 is optimal")
        self.rho_y = rho_y
        self.sigma = sigma
