"""Euclidean projection onto the l1 ball of radius tau."""
from dataclasses import dataclass

import numpy as np

from sparse_levelset.errors import DomainError

# Inputs whose l1 norm exceeds tau by less than this relative amount are
# treated as feasible, so projecting a projection returns it unchanged.
FEASIBILITY_RTOL = 1e-12


@dataclass
class ProjectionResult:
    x: np.ndarray
    kappa: float
    support_size: int


def project(a, tau: float) -> ProjectionResult:
    """Project ``a`` onto {x : ||x||_1 <= tau}.

    Feasible inputs come back unchanged with kappa = 0. Otherwise the
    magnitudes are sorted in descending order (ties by original index),
    K is the largest k with (sum_{j<=k} c_j - tau) / k <= c_k, and the
    result is the soft threshold of ``a`` at kappa = (sum_{j<=K} c_j - tau) / K.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise DomainError("Projection input must be a non-empty vector")
    if not tau >= 0:
        raise DomainError(f"Ball radius must be nonnegative, got {tau}")

    magnitudes = np.abs(a)
    if magnitudes.sum() <= tau * (1.0 + FEASIBILITY_RTOL):
        return ProjectionResult(x=a.copy(), kappa=0.0, support_size=int(np.count_nonzero(a)))

    order = np.argsort(-magnitudes, kind="stable")
    c = magnitudes[order]
    excess = np.cumsum(c) - tau
    k = np.arange(1, c.size + 1)
    admissible = np.nonzero(excess / k <= c)[0]
    # k = 1 is always admissible because tau >= 0
    K = int(admissible[-1]) + 1
    kappa = float(excess[K - 1] / K)

    x = np.sign(a) * np.maximum(magnitudes - kappa, 0.0)
    return ProjectionResult(x=x, kappa=kappa, support_size=K)


def project_vector(a, tau: float) -> np.ndarray:
    """Shorthand returning only the projected vector."""
    return project(a, tau).x
