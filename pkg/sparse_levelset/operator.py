"""The dictionary D and the method-of-frames decomposition.

A :class:`Dictionary` is either a dense row-major float64 matrix or an
implicit operator given by forward/adjoint callbacks (wrapped in a scipy
``LinearOperator``). Both are immutable once built.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky
from scipy.sparse.linalg import LinearOperator

from sparse_levelset.errors import DimensionMismatchError, DomainError, RankDeficiencyError

logger = logging.getLogger(__name__)

PIVOT_RTOL = 1e-12
REGULARIZATION_SCALE = 1e-10


class Dictionary:
    """M x N linear operator with forward and adjoint application."""

    def __init__(self, matrix: Optional[np.ndarray] = None, operator: Optional[LinearOperator] = None):
        if (matrix is None) == (operator is None):
            raise DomainError("Provide exactly one of a dense matrix or an implicit operator")
        if matrix is not None:
            matrix = np.ascontiguousarray(matrix, dtype=np.float64)
            if matrix.ndim != 2:
                raise DomainError("Dictionary matrix must be two-dimensional")
            matrix.setflags(write=False)
            self._matrix = matrix
            self._operator = None
            self.rows, self.cols = matrix.shape
        else:
            self._matrix = None
            self._operator = operator
            self.rows, self.cols = operator.shape
        if self.rows < 1 or self.cols < 1:
            raise DomainError("Dictionary must have at least one row and one column")
        if self.rows > self.cols:
            raise DomainError(f"Dictionary must satisfy M <= N, got {self.rows} x {self.cols}")

    @classmethod
    def from_callbacks(
        cls,
        rows: int,
        cols: int,
        forward: Callable[[np.ndarray], np.ndarray],
        adjoint: Callable[[np.ndarray], np.ndarray],
    ) -> "Dictionary":
        op = LinearOperator((rows, cols), matvec=forward, rmatvec=adjoint, dtype=np.float64)
        return cls(operator=op)

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def is_dense(self) -> bool:
        return self._matrix is not None

    @property
    def matrix(self) -> Optional[np.ndarray]:
        return self._matrix

    def apply(self, x) -> np.ndarray:
        """Return D x."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.cols,):
            raise DimensionMismatchError(f"apply expects a vector of length {self.cols}, got shape {x.shape}")
        if self._matrix is not None:
            return self._matrix @ x
        return np.asarray(self._operator.matvec(x), dtype=np.float64).reshape(self.rows)

    def apply_adjoint(self, u) -> np.ndarray:
        """Return D^T u."""
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.rows,):
            raise DimensionMismatchError(f"apply_adjoint expects a vector of length {self.rows}, got shape {u.shape}")
        if self._matrix is not None:
            return self._matrix.T @ u
        return np.asarray(self._operator.rmatvec(u), dtype=np.float64).reshape(self.cols)

    def gram(self) -> np.ndarray:
        """Dense D D^T."""
        if self._matrix is not None:
            return self._matrix @ self._matrix.T
        G = np.empty((self.rows, self.rows))
        e = np.zeros(self.rows)
        for i in range(self.rows):
            e[i] = 1.0
            G[:, i] = self.apply(self.apply_adjoint(e))
            e[i] = 0.0
        return 0.5 * (G + G.T)


def apply(d: Dictionary, x) -> np.ndarray:
    return d.apply(x)


def apply_adjoint(d: Dictionary, u) -> np.ndarray:
    return d.apply_adjoint(u)


@dataclass
class FramesDecomposition:
    x: np.ndarray
    tau: float
    regularized: bool = False
    shift: float = 0.0


def mof_decomposition(d: Dictionary, y, allow_regularization: bool = False) -> FramesDecomposition:
    """Minimum l2-norm exact decomposition x = D^T (D D^T)^{-1} y.

    The Gram system is solved by Cholesky. A pivot below
    ``PIVOT_RTOL * ||D D^T||`` raises :class:`RankDeficiencyError` unless
    ``allow_regularization`` is set, in which case the diagonal is shifted by
    ``1e-10 * trace / M`` and the result is flagged ``regularized``.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (d.rows,):
        raise DimensionMismatchError(f"Measurement must have length {d.rows}, got shape {y.shape}")

    G = d.gram()
    g_norm = float(np.linalg.norm(G, 2))
    threshold = PIVOT_RTOL * g_norm
    factor = None
    diagnostic = ""
    try:
        L = cholesky(G, lower=True)
        min_pivot = float(np.min(np.diag(L)) ** 2)
        if min_pivot < threshold:
            diagnostic = f"smallest pivot {min_pivot:.3e} below {threshold:.3e}"
        else:
            factor = (L, True)
    except LinAlgError as e:
        diagnostic = f"Cholesky factorization failed: {e}"

    shift = 0.0
    if factor is None:
        if g_norm == 0.0:
            raise RankDeficiencyError("D D^T is identically zero")
        if not allow_regularization:
            raise RankDeficiencyError(f"D D^T is numerically singular ({d.rows} x {d.rows}): {diagnostic}")
        shift = REGULARIZATION_SCALE * float(np.trace(G)) / d.rows
        logger.warning("Regularizing frames solve with diagonal shift %.3e (%s)", shift, diagnostic)
        factor = (cholesky(G + shift * np.eye(d.rows), lower=True), True)

    x = d.apply_adjoint(cho_solve(factor, y))
    return FramesDecomposition(x=x, tau=float(np.sum(np.abs(x))), regularized=shift > 0.0, shift=shift)
