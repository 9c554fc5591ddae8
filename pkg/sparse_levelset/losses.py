"""Misfit penalties rho(r) and their gradients.

Three families are supported: least squares (the Euclidean norm of the
residual), Huber with knee ``delta`` and Student's t with ``nu`` degrees of
freedom. Student's t is nonconvex; the other two are convex.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import huber

from sparse_levelset.errors import DomainError

DEFAULT_DELTA = 5e-3
DEFAULT_NU = 1e-2


class LossKind(Enum):
    LEAST_SQUARES = "ls"
    HUBER = "huber"
    STUDENT_T = "student"


@dataclass(frozen=True)
class LossModel:
    kind: LossKind
    delta: float = DEFAULT_DELTA
    nu: float = DEFAULT_NU

    def __post_init__(self):
        if not isinstance(self.kind, LossKind):
            raise DomainError(f"Unknown loss kind: {self.kind!r}")
        if not self.delta > 0:
            raise DomainError(f"Huber delta must be positive, got {self.delta}")
        if not self.nu > 0:
            raise DomainError(f"Student's t nu must be positive, got {self.nu}")

    @property
    def convex(self) -> bool:
        return self.kind is not LossKind.STUDENT_T

    @property
    def label(self) -> str:
        return self.kind.value

    @classmethod
    def least_squares(cls) -> "LossModel":
        return cls(LossKind.LEAST_SQUARES)

    @classmethod
    def huber(cls, delta: float = DEFAULT_DELTA) -> "LossModel":
        return cls(LossKind.HUBER, delta=delta)

    @classmethod
    def student_t(cls, nu: float = DEFAULT_NU) -> "LossModel":
        return cls(LossKind.STUDENT_T, nu=nu)

    @classmethod
    def from_token(cls, token: str, delta: float = DEFAULT_DELTA, nu: float = DEFAULT_NU) -> "LossModel":
        """Build a model from a command-line token (``ls``, ``huber``, ``student``)."""
        try:
            kind = LossKind(token.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in LossKind)
            raise DomainError(f"Unknown loss {token!r}. Must be one of: {valid}")
        return cls(kind, delta=delta, nu=nu)

    def value(self, r: np.ndarray) -> float:
        return loss_value(self, r)

    def gradient(self, r: np.ndarray) -> np.ndarray:
        return loss_gradient(self, r)


def _as_residual(r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 1 or r.size == 0:
        raise DomainError("Residual must be a non-empty vector")
    return r


def loss_value(model: LossModel, r) -> float:
    """Evaluate rho(r) for the selected family."""
    r = _as_residual(r)
    if model.kind is LossKind.LEAST_SQUARES:
        return float(np.linalg.norm(r))
    if model.kind is LossKind.HUBER:
        # scipy's huber is delta * (our penalty)
        return float(np.sum(huber(model.delta, r)) / model.delta)
    return float(model.nu * np.sum(np.log1p(r * r / model.nu)))


def loss_gradient(model: LossModel, r) -> np.ndarray:
    """Gradient of rho with respect to the residual.

    The least-squares gradient at r = 0 is taken to be 0. Huber components
    sitting exactly on the knee use the quadratic branch.
    """
    r = _as_residual(r)
    if model.kind is LossKind.LEAST_SQUARES:
        norm = np.linalg.norm(r)
        if norm == 0.0:
            return np.zeros_like(r)
        return r / norm
    if model.kind is LossKind.HUBER:
        return np.where(np.abs(r) <= model.delta, r / model.delta, np.sign(r))
    return 2.0 * r / (1.0 + r * r / model.nu)
