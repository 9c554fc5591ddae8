"""Spectral projected gradient solver for the tau-constrained problem.

    minimize rho(y - D x)  subject to  ||x||_1 <= tau

The iteration is x+ = proj(x - gamma * grad), where
grad = -D^T rho'(y - D x) is the gradient with respect to x, so the
descent step moves along +D^T rho'(r). gamma is a Barzilai-Borwein step,
accepted by a nonmonotone Armijo test over the last ``ls_memory`` values.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from sparse_levelset.config import SolverSettings
from sparse_levelset.errors import ConfigError, DimensionMismatchError, DomainError, NumericalFailureError
from sparse_levelset.l1ball import project_vector
from sparse_levelset.losses import LossModel, loss_gradient, loss_value
from sparse_levelset.operator import Dictionary

logger = logging.getLogger(__name__)


@dataclass
class TauConfig:
    max_iters: int = 10000
    opt_tol: float = 1e-6
    step_min: float = 1e-16
    step_max: float = 1e16
    ls_memory: int = 10
    ls_sufficient_decrease: float = 1e-4
    ls_max_backtracks: int = 30
    max_line_errors: int = 3

    def __post_init__(self):
        for name in ("max_iters", "opt_tol", "step_min", "step_max", "ls_memory",
                     "ls_sufficient_decrease", "ls_max_backtracks"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"TauConfig.{name} must be positive, got {getattr(self, name)}")
        if self.max_line_errors < 0:
            raise ConfigError("TauConfig.max_line_errors must be nonnegative")
        if not self.step_min < self.step_max:
            raise ConfigError("TauConfig.step_min must be smaller than step_max")

    @classmethod
    def from_settings(cls, settings: SolverSettings) -> "TauConfig":
        return cls(max_iters=settings.max_iters, opt_tol=settings.opt_tol, ls_memory=settings.ls_memory)


class ExitReason(Enum):
    OPTIMAL = "optimal"
    ITERATION_CAP = "iteration-cap"
    STALL = "stall"


@dataclass
class ProductCounts:
    apply: int = 0
    adjoint: int = 0

    @property
    def total(self) -> int:
        return self.apply + self.adjoint


@dataclass
class TauSolution:
    x: np.ndarray
    value: float
    residual: np.ndarray
    iterations: int
    products: ProductCounts = field(default_factory=ProductCounts)
    converged: bool = True
    reason: ExitReason = ExitReason.OPTIMAL
    tau: float = 0.0


class _Objective:
    """Loss and gradient evaluation with product counting."""

    def __init__(self, d: Dictionary, y: np.ndarray, model: LossModel):
        self.d = d
        self.y = y
        self.model = model
        self.products = ProductCounts()

    def value(self, x: np.ndarray) -> Tuple[np.ndarray, float]:
        r = self.y - self.d.apply(x)
        self.products.apply += 1
        f = loss_value(self.model, r)
        if not np.isfinite(f):
            raise NumericalFailureError(f"Non-finite loss value {f}", iterate=x.copy())
        return r, f

    def gradient(self, x: np.ndarray, r: np.ndarray) -> np.ndarray:
        g = -self.d.apply_adjoint(loss_gradient(self.model, r))
        self.products.adjoint += 1
        if not np.all(np.isfinite(g)):
            raise NumericalFailureError("Non-finite gradient", iterate=x.copy())
        return g


def _curvy_search(obj: _Objective, x, g, gstep, fmax, tau, cfg: TauConfig):
    """Backtrack along the projected arc proj(x - alpha * gstep * g)."""
    direction = gstep * g
    alpha = 1.0
    scale = 1.0
    snorm = 0.0
    nsafe = 0
    n = x.size
    for _ in range(cfg.ls_max_backtracks + 1):
        x_new = project_vector(x - alpha * scale * direction, tau)
        s = x_new - x
        gts = float(g @ s)
        if gts >= 0:
            return None
        r_new, f_new = obj.value(x_new)
        if f_new <= fmax + cfg.ls_sufficient_decrease * gts:
            return x_new, r_new, f_new
        alpha /= 2.0
        # Huge steps can project to the same point for several halvings;
        # damp the direction hard when that happens.
        snorm_old = snorm
        snorm = np.linalg.norm(s) / np.sqrt(n)
        if abs(snorm - snorm_old) <= 1e-6 * snorm:
            gnorm = np.linalg.norm(direction) / np.sqrt(n)
            scale = snorm / gnorm / (2.0 ** nsafe)
            nsafe += 1
    return None


def _feasible_search(obj: _Objective, x, g, gstep, f, fmax, tau, cfg: TauConfig):
    """Backtrack along the feasible direction d = proj(x - gstep * g) - x."""
    d = project_vector(x - gstep * g, tau) - x
    gtd = float(g @ d)
    if gtd >= 0:
        return None
    step = 1.0
    for _ in range(cfg.ls_max_backtracks + 1):
        x_new = x + step * d
        r_new, f_new = obj.value(x_new)
        if f_new <= fmax + cfg.ls_sufficient_decrease * step * gtd:
            return x_new, r_new, f_new
        # safeguarded quadratic interpolation
        if step <= 0.1:
            step /= 2.0
        else:
            trial = (-gtd * step ** 2) / (2.0 * (f_new - f - step * gtd))
            if not np.isfinite(trial) or trial < 0.1 or trial > 0.9 * step:
                trial = step / 2.0
            step = trial
    return None


def solve_tau(
    d: Dictionary,
    y,
    model: LossModel,
    tau: float,
    x0: Optional[np.ndarray] = None,
    cfg: Optional[TauConfig] = None,
) -> TauSolution:
    """Minimize rho(y - D x) over the l1 ball of radius ``tau``.

    A warm start outside the ball is projected first. The best iterate seen
    is returned, so the value never exceeds the loss at the (projected)
    starting point.
    """
    cfg = cfg or TauConfig()
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (d.rows,):
        raise DimensionMismatchError(f"Measurement must have length {d.rows}, got shape {y.shape}")
    if not tau >= 0:
        raise DomainError(f"tau must be nonnegative, got {tau}")
    tau = float(tau)

    if tau == 0.0:
        residual = y.copy()
        return TauSolution(x=np.zeros(d.cols), value=loss_value(model, residual), residual=residual,
                           iterations=0, tau=tau)

    # Start from zero or the projected warm start
    if x0 is None:
        x = np.zeros(d.cols)
    else:
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.shape != (d.cols,):
            raise DimensionMismatchError(f"Warm start must have length {d.cols}, got shape {x0.shape}")
        x = project_vector(x0, tau)

    obj = _Objective(d, y, model)
    rho_y = loss_value(model, y)
    pg_tol = cfg.opt_tol * (1.0 + float(np.linalg.norm(y)))

    # Initial residual, value and gradient
    r, f = obj.value(x)
    g = obj.gradient(x, r)
    history = deque([f], maxlen=cfg.ls_memory)
    best_x, best_r, best_f = x, r, f

    # Initial step from one projected gradient move
    step_max = cfg.step_max
    dxnorm = float(np.linalg.norm(project_vector(x - g, tau) - x, np.inf))
    gstep = step_max if dxnorm < 1.0 / step_max else min(step_max, max(cfg.step_min, 1.0 / dxnorm))

    iterations = 0
    line_errors = 0
    while True:
        # Check optimality
        pg_norm = float(np.linalg.norm(project_vector(x - g, tau) - x, np.inf))
        if pg_norm <= pg_tol or f <= cfg.opt_tol * rho_y:
            reason = ExitReason.OPTIMAL
            break
        if iterations >= cfg.max_iters:
            reason = ExitReason.ITERATION_CAP
            break
        iterations += 1

        # Nonmonotone reference value
        fmax = max(history)
        accepted = _curvy_search(obj, x, g, gstep, fmax, tau, cfg)
        if accepted is None:
            accepted = _feasible_search(obj, x, g, gstep, f, fmax, tau, cfg)
        if accepted is None:
            line_errors += 1
            if line_errors > cfg.max_line_errors:
                reason = ExitReason.STALL
                break
            step_max = max(cfg.step_min, min(step_max, gstep) / 10.0)
            gstep = step_max
            logger.warning("Line search failed at iteration %d; damping max BB step to %.3e", iterations, step_max)
            continue

        # Barzilai-Borwein step for the next iteration
        x_new, r_new, f_new = accepted
        g_new = obj.gradient(x_new, r_new)
        s = x_new - x
        sts = float(s @ s)
        sty = float(s @ (g_new - g))
        gstep = step_max if sty <= 0 else min(step_max, max(cfg.step_min, sts / sty))

        # Accept and track the best iterate
        x, r, f, g = x_new, r_new, f_new, g_new
        history.append(f)
        if f < best_f:
            best_x, best_r, best_f = x, r, f

    logger.debug("solve_tau tau=%.6g exit=%s iters=%d value=%.6g products=%d",
                 tau, reason.value, iterations, best_f, obj.products.total)
    return TauSolution(
        x=best_x,
        value=best_f,
        residual=best_r,
        iterations=iterations,
        products=obj.products,
        converged=reason is ExitReason.OPTIMAL,
        reason=reason,
        tau=tau,
    )


def dual_certificate(d: Dictionary, model: LossModel, solution: TauSolution) -> float:
    """lambda = ||D^T rho'(r)||_inf at a tau-solution; the frontier slope magnitude."""
    return float(np.linalg.norm(d.apply_adjoint(loss_gradient(model, solution.residual)), np.inf))
