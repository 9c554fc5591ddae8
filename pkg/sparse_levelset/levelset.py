"""Level-set driver for the sigma-constrained problem.

    minimize ||x||_1  subject to  rho(y - D x) <= sigma

is solved by finding the root of psi(tau) = nu(tau) - sigma, where nu(tau)
is the optimal value of the tau-constrained problem (see :mod:`spg`). The
root is bracketed by tau = 0 (x = 0) and tau_MF, the l1 norm of the
method-of-frames decomposition, where the misfit vanishes.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from sparse_levelset.config import SolverSettings
from sparse_levelset.errors import (
    ConfigError,
    DimensionMismatchError,
    DomainError,
    NewtonStallError,
    UnsupportedModelError,
    ZeroSolutionSignal,
)
from sparse_levelset.losses import LossModel, loss_value
from sparse_levelset.operator import Dictionary, FramesDecomposition, mof_decomposition
from sparse_levelset.rootfind import Bracket, RFMethod, StopReason, solve_root
from sparse_levelset.spg import TauConfig, TauSolution, dual_certificate, solve_tau

logger = logging.getLogger(__name__)

NEWTON = "newton"
ZERO_SOLUTION = "zero-solution"
MIN_SLOPE = 1e-14


@dataclass
class SigmaProblem:
    d: Dictionary
    y: np.ndarray
    model: LossModel
    sigma: float

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.y.shape != (self.d.rows,):
            raise DimensionMismatchError(f"Measurement must have length {self.d.rows}, got shape {self.y.shape}")
        if not self.sigma >= 0:
            raise DomainError(f"sigma must be nonnegative, got {self.sigma}")
        self.sigma = float(self.sigma)

    @property
    def rho_y(self) -> float:
        return loss_value(self.model, self.y)

    def misfit(self, x: np.ndarray) -> float:
        """rho(y - D x)."""
        return loss_value(self.model, self.y - self.d.apply(x))


@dataclass
class SigmaConfig:
    """Outer-loop settings. ``eps=None`` means 1e-6 * tau_MF."""
    eps: Optional[float] = None
    ftol_rel: float = 1e-3
    max_root_iter: int = 200
    warm_start: bool = True
    allow_regularization: bool = False

    def __post_init__(self):
        if self.eps is not None and not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if not self.ftol_rel >= 0:
            raise ConfigError(f"ftol_rel must be nonnegative, got {self.ftol_rel}")
        if self.max_root_iter < 1:
            raise ConfigError("max_root_iter must be at least 1")

    @classmethod
    def from_settings(cls, settings: SolverSettings) -> "SigmaConfig":
        return cls(ftol_rel=settings.ftol_rel, max_root_iter=settings.max_root_iter,
                   warm_start=settings.warm_start)


@dataclass
class SigmaReport:
    x_sigma: np.ndarray
    rho_r: float
    x_norm1: float
    nnz: int
    tau_solves: int
    tau_trajectory: List[Tuple[float, float]] = field(default_factory=list)
    converged: bool = False
    tau: float = 0.0
    sigma: float = 0.0
    method: str = ""
    stop_reason: str = ""
    inexact_evaluations: int = 0


def count_nnz(x, rel_threshold: float = 1e-6) -> int:
    """Entries with |x_i| > rel_threshold * ||x||_inf."""
    if rel_threshold < 0:
        raise DomainError(f"rel_threshold must be nonnegative, got {rel_threshold}")
    x = np.abs(np.asarray(x, dtype=np.float64))
    if x.size == 0:
        return 0
    peak = float(np.max(x))
    if peak == 0.0:
        return 0
    return int(np.count_nonzero(x > rel_threshold * peak))


def pareto_psi(prob: SigmaProblem, tau: float, warm: Optional[np.ndarray] = None,
               cfg: Optional[TauConfig] = None) -> Tuple[float, TauSolution]:
    """psi(tau) = nu(tau) - sigma, together with the tau-solution behind it."""
    solution = solve_tau(prob.d, prob.y, prob.model, tau, x0=warm, cfg=cfg)
    return solution.value - prob.sigma, solution


class ParetoOracle:
    """psi as a scalar callback, remembering every tau-solution it produced.

    Each call warm-starts from the previous solution unless warm starting is
    switched off.
    """

    def __init__(self, prob: SigmaProblem, cfg: Optional[TauConfig] = None, warm_start: bool = True):
        self.prob = prob
        self.cfg = cfg
        self.warm_start = warm_start
        self.solutions: Dict[float, TauSolution] = {}
        self.trajectory: List[Tuple[float, float]] = []
        self.tau_solves = 0
        self.inexact = 0
        self._last_x: Optional[np.ndarray] = None

    def __call__(self, tau: float) -> float:
        warm = self._last_x if self.warm_start else None
        psi, solution = pareto_psi(self.prob, tau, warm, self.cfg)
        self.tau_solves += 1
        if not solution.converged:
            self.inexact += 1
            logger.warning("Inexact psi evaluation at tau=%.6g (%s after %d iterations)",
                           tau, solution.reason.value, solution.iterations)
        self.solutions[tau] = solution
        self._last_x = solution.x
        self.trajectory.append((tau, psi))
        return psi


def _frames_bracket(prob: SigmaProblem, allow_regularization: bool = False) -> Tuple[Bracket, FramesDecomposition]:
    rho_y = prob.rho_y
    if rho_y <= prob.sigma:
        raise ZeroSolutionSignal(rho_y, prob.sigma)
    frames = mof_decomposition(prob.d, prob.y, allow_regularization=allow_regularization)
    if frames.regularized:
        fb = prob.misfit(frames.x) - prob.sigma
    else:
        fb = -prob.sigma
    if prob.sigma == 0.0:
        logger.warning("sigma = 0: returning the frames decomposition, which fits exactly but is not l1-minimal")
    return Bracket(a=0.0, b=frames.tau, fa=rho_y - prob.sigma, fb=fb), frames


def bracket_initial(prob: SigmaProblem, allow_regularization: bool = False) -> Bracket:
    """Bracket [0, tau_MF] with psi(0) = rho(y) - sigma and psi(tau_MF) = -sigma.

    Raises :class:`ZeroSolutionSignal` when rho(y) <= sigma.
    """
    return _frames_bracket(prob, allow_regularization)[0]


def frames_tau(prob: SigmaProblem, allow_regularization: bool = False) -> float:
    return mof_decomposition(prob.d, prob.y, allow_regularization=allow_regularization).tau


def _report(prob: SigmaProblem, x: np.ndarray, tau: float, method: str, stop_reason: str, converged: bool,
            tau_solves: int, trajectory: List[Tuple[float, float]], inexact: int) -> SigmaReport:
    return SigmaReport(
        x_sigma=x,
        rho_r=prob.misfit(x),
        x_norm1=float(np.sum(np.abs(x))),
        nnz=count_nnz(x),
        tau_solves=tau_solves,
        tau_trajectory=list(trajectory),
        converged=converged,
        tau=float(tau),
        sigma=prob.sigma,
        method=method,
        stop_reason=stop_reason,
        inexact_evaluations=inexact,
    )


def _zero_report(prob: SigmaProblem, method: str, signal: ZeroSolutionSignal) -> SigmaReport:
    logger.info("%s", signal)
    return _report(prob, np.zeros(prob.d.cols), 0.0, method, ZERO_SOLUTION, True, 0,
                   [(0.0, signal.rho_y - signal.sigma)], 0)


def _resolve(options: Optional[SigmaConfig], eps: Optional[float], ftol_rel: Optional[float]) -> SigmaConfig:
    options = options or SigmaConfig()
    return SigmaConfig(
        eps=eps if eps is not None else options.eps,
        ftol_rel=ftol_rel if ftol_rel is not None else options.ftol_rel,
        max_root_iter=options.max_root_iter,
        warm_start=options.warm_start,
        allow_regularization=options.allow_regularization,
    )


def _width_tolerance(options: SigmaConfig, tau_mf: float) -> float:
    if options.eps is not None:
        return options.eps
    return max(1e-6 * tau_mf, np.finfo(float).tiny)


def solve_sigma(
    prob: SigmaProblem,
    method: RFMethod = RFMethod.ILLINOIS,
    eps: Optional[float] = None,
    ftol_rel: Optional[float] = None,
    cfg: Optional[TauConfig] = None,
    options: Optional[SigmaConfig] = None,
) -> SigmaReport:
    """Solve the sigma problem with a Regula Falsi-type root finder on psi.

    Every secant point costs one tau-solve; psi(0) and psi(tau_MF) are known
    without solving. ``eps`` and ``ftol_rel`` override the values in
    ``options``.
    """
    options = _resolve(options, eps, ftol_rel)
    # Bracket [0, tau_MF] from the frames solution
    try:
        bracket, frames = _frames_bracket(prob, options.allow_regularization)
    except ZeroSolutionSignal as signal:
        return _zero_report(prob, method.value, signal)

    # Root-find psi, one tau-solve per secant point
    ftol = options.ftol_rel * max(prob.sigma, 1e-12)
    oracle = ParetoOracle(prob, cfg, options.warm_start)
    oracle.trajectory.extend([(bracket.a, bracket.fa), (bracket.b, bracket.fb)])
    root = solve_root(oracle, bracket.a, bracket.b, method=method, eps=_width_tolerance(options, frames.tau),
                      ftol=ftol, max_iter=options.max_root_iter, fa=bracket.fa, fb=bracket.fb)

    # Recover x at the returned tau
    if root.root in oracle.solutions:
        x = oracle.solutions[root.root].x
    elif root.root == bracket.a:
        x = np.zeros(prob.d.cols)
    else:
        x = frames.x
    logger.info("%s: tau=%.6g after %d tau-solves (%s)", method.value, root.root, oracle.tau_solves,
                root.reason.value)
    return _report(prob, x, root.root, method.value, root.reason.value, root.converged,
                   oracle.tau_solves, oracle.trajectory, oracle.inexact)


def newton_solve_sigma(
    prob: SigmaProblem,
    eps: Optional[float] = None,
    ftol_rel: Optional[float] = None,
    cfg: Optional[TauConfig] = None,
    options: Optional[SigmaConfig] = None,
) -> SigmaReport:
    """Newton iteration on psi with psi'(tau) = -||D^T rho'(r_tau)||_inf.

    Only convex losses are accepted. Iterates are clipped into [0, tau_MF]
    and the stopping tests match :func:`solve_sigma`.
    """
    if not prob.model.convex:
        raise UnsupportedModelError(
            f"Newton's method is not supported for the nonconvex {prob.model.label!r} loss")
    options = _resolve(options, eps, ftol_rel)
    try:
        bracket, frames = _frames_bracket(prob, options.allow_regularization)
    except ZeroSolutionSignal as signal:
        return _zero_report(prob, NEWTON, signal)

    width_tol = _width_tolerance(options, frames.tau)
    ftol = options.ftol_rel * max(prob.sigma, 1e-12)
    oracle = ParetoOracle(prob, cfg, options.warm_start)
    oracle.trajectory.append((bracket.a, bracket.fa))

    tau, psi = bracket.a, bracket.fa
    solution = TauSolution(x=np.zeros(prob.d.cols), value=prob.rho_y, residual=prob.y.copy(), iterations=0)
    stop_reason = StopReason.MAX_ITER
    for _ in range(options.max_root_iter):
        if abs(psi) <= ftol:
            stop_reason = StopReason.FTOL
            break
        # Frontier slope from the dual certificate
        slope = dual_certificate(prob.d, prob.model, solution)
        if slope < MIN_SLOPE:
            raise NewtonStallError(f"Frontier slope {slope:.3e} too small at tau={tau:.6g}",
                                   iterate=solution.x.copy())
        # Newton step, clipped into the bracket
        tau_next = float(np.clip(tau + psi / slope, 0.0, frames.tau))
        if abs(tau_next - tau) <= width_tol:
            stop_reason = StopReason.WIDTH
            break
        psi = oracle(tau_next)
        tau = tau_next
        solution = oracle.solutions[tau]
    else:
        if abs(psi) <= ftol:
            stop_reason = StopReason.FTOL

    converged = stop_reason is not StopReason.MAX_ITER
    logger.info("newton: tau=%.6g after %d tau-solves (%s)", tau, oracle.tau_solves, stop_reason.value)
    return _report(prob, solution.x, tau, NEWTON, stop_reason.value, converged,
                   oracle.tau_solves, oracle.trajectory, oracle.inexact)


def solve_with(prob: SigmaProblem, method: Union[RFMethod, str], cfg: Optional[TauConfig] = None,
               options: Optional[SigmaConfig] = None) -> SigmaReport:
    """Dispatch on a method token: any :class:`RFMethod` or ``"newton"``."""
    if isinstance(method, str):
        if method.strip().lower() == NEWTON:
            return newton_solve_sigma(prob, cfg=cfg, options=options)
        method = RFMethod.from_token(method)
    return solve_sigma(prob, method, cfg=cfg, options=options)


def sample_pareto_curve(prob: SigmaProblem, taus: Sequence[float], cfg: Optional[TauConfig] = None,
                        warm_start: bool = True) -> List[Tuple[float, float]]:
    """Warm-started sweep of nu(tau) over an ascending grid."""
    taus = np.asarray(taus, dtype=np.float64)
    if taus.ndim != 1:
        raise DomainError("tau grid must be one-dimensional")
    if taus.size and (taus[0] < 0 or np.any(np.diff(taus) < 0)):
        raise DomainError("tau grid must be nonnegative and sorted ascending")
    curve = []
    warm = None
    for tau in taus:
        solution = solve_tau(prob.d, prob.y, prob.model, float(tau), x0=warm, cfg=cfg)
        if warm_start:
            warm = solution.x
        curve.append((float(tau), solution.value))
    return curve
