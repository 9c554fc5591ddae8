"""Bracketing root finders of the Regula Falsi family.

Every method keeps an interval [a, b] with f(a) f(b) < 0. A secant step
gives c; when f(c) has the sign of f(a) the old b becomes the new a,
otherwise the stale endpoint value f(a) is scaled by a method-specific
factor mu before b moves to c.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

from sparse_levelset.errors import BracketError, DomainError, InvariantViolationError, NumericalFailureError

logger = logging.getLogger(__name__)


class RFMethod(Enum):
    REGULA_FALSI = "rf"
    ILLINOIS = "illinois"
    PEGASUS = "pegasus"
    ANDERSON_BJORCK = "ab"

    @classmethod
    def from_token(cls, token: str) -> "RFMethod":
        try:
            return cls(token.strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise DomainError(f"Unknown root-finding method {token!r}. Must be one of: {valid}")


class StopReason(Enum):
    FTOL = "ftol"
    WIDTH = "width"
    MAX_ITER = "max-iter"


@dataclass
class Bracket:
    a: float
    b: float
    fa: float
    fb: float

    @property
    def width(self) -> float:
        return abs(self.b - self.a)

    def check_sign(self) -> None:
        if not self.fa * self.fb < 0:
            raise InvariantViolationError(
                f"Bracket sign invariant violated: f({self.a!r}) = {self.fa!r}, f({self.b!r}) = {self.fb!r}")

    def best_endpoint(self) -> Tuple[float, float]:
        """Endpoint with the smaller |f|, preferring b on ties."""
        if abs(self.fb) <= abs(self.fa):
            return self.b, self.fb
        return self.a, self.fa


@dataclass
class RootReport:
    root: float
    froot: float
    evaluations: int
    trajectory: List[Tuple[float, float]] = field(default_factory=list)
    converged: bool = False
    reason: StopReason = StopReason.MAX_ITER
    bracket: Optional[Bracket] = None


def secant_intersection(br: Bracket) -> float:
    """Zero of the secant through (a, fa) and (b, fb).

    If rounding pushes the point onto or past an endpoint, the midpoint is
    used so the result always lies strictly inside the bracket.
    """
    if br.fa == br.fb:
        raise InvariantViolationError(f"Secant is horizontal: fa = fb = {br.fa!r}")
    c = br.b - br.fb * (br.b - br.a) / (br.fb - br.fa)
    lo, hi = min(br.a, br.b), max(br.a, br.b)
    if not lo < c < hi:
        c = 0.5 * (br.a + br.b)
    return c


def mu_factor(method: RFMethod, fb: float, fc: float) -> float:
    """Scaling applied to the stale endpoint value f(a)."""
    if method is RFMethod.REGULA_FALSI:
        return 1.0
    if method is RFMethod.ILLINOIS:
        return 0.5
    if method is RFMethod.PEGASUS:
        return fb / (fb + fc)
    ratio = fc / fb
    if ratio >= 1.0:
        return 0.5
    return 1.0 - ratio


def rf_step(br: Bracket, c: float, fc: float, method: RFMethod) -> Bracket:
    """Shrink the bracket after evaluating f(c)."""
    if fc * br.fb < 0:
        return Bracket(a=br.b, b=c, fa=br.fb, fb=fc)
    return Bracket(a=br.a, b=c, fa=mu_factor(method, br.fb, fc) * br.fa, fb=fc)


def _checked(f: Callable[[float], float], x: float) -> float:
    value = float(f(x))
    if not math.isfinite(value):
        raise NumericalFailureError(f"Non-finite function value {value} at {x!r}")
    return value


def solve_root(
    f: Callable[[float], float],
    a: float,
    b: float,
    method: RFMethod = RFMethod.ILLINOIS,
    eps: float = 1e-10,
    ftol: float = 0.0,
    max_iter: int = 200,
    fa: Optional[float] = None,
    fb: Optional[float] = None,
) -> RootReport:
    """Find a sign change of ``f`` between ``a`` and ``b``.

    Endpoint values may be passed in as ``fa``/``fb``; those are not counted
    as evaluations. Stops when |f(c)| <= ftol, when the bracket is no wider
    than ``eps`` (returning the endpoint with the smaller |f|), or after
    ``max_iter`` secant steps with ``converged=False``.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if ftol < 0:
        raise DomainError(f"ftol must be nonnegative, got {ftol}")

    evaluations = 0
    if fa is None:
        fa = _checked(f, a)
        evaluations += 1
    if fb is None:
        fb = _checked(f, b)
        evaluations += 1

    if fa == 0.0:
        return RootReport(root=a, froot=0.0, evaluations=evaluations, converged=True, reason=StopReason.FTOL)
    if fb == 0.0:
        return RootReport(root=b, froot=0.0, evaluations=evaluations, converged=True, reason=StopReason.FTOL)
    if not fa * fb < 0:
        raise BracketError(f"f({a!r}) = {fa!r} and f({b!r}) = {fb!r} do not bracket a root")

    br = Bracket(a=float(a), b=float(b), fa=float(fa), fb=float(fb))
    trajectory: List[Tuple[float, float]] = []
    for _ in range(max_iter):
        if br.width <= eps:
            root, froot = br.best_endpoint()
            return RootReport(root, froot, evaluations, trajectory, True, StopReason.WIDTH, br)

        c = secant_intersection(br)
        fc = _checked(f, c)
        evaluations += 1
        trajectory.append((c, fc))
        logger.debug("%s step %d: c=%.12g f(c)=%.6g width=%.3g",
                     method.value, len(trajectory), c, fc, br.width)
        if abs(fc) <= ftol:
            return RootReport(c, fc, evaluations, trajectory, True, StopReason.FTOL, br)

        width = br.width
        br = rf_step(br, c, fc, method)
        br.check_sign()
        if br.width > width:
            raise InvariantViolationError(f"Bracket widened from {width!r} to {br.width!r}")

    if br.width <= eps:
        root, froot = br.best_endpoint()
        return RootReport(root, froot, evaluations, trajectory, True, StopReason.WIDTH, br)
    root, froot = br.best_endpoint()
    logger.debug("%s stopped after %d steps without meeting tolerances", method.value, max_iter)
    return RootReport(root, froot, evaluations, trajectory, False, StopReason.MAX_ITER, br)
