"""
Log-barrier interior-point engine.

Problems are posed as: minimize f(z) subject to g_i(z) <= 0, with f and every
g_i convex and twice differentiable on an open domain. Each centering step is
a damped Newton method with backtracking line search; the barrier parameter
grows geometrically until the duality-gap bound m/t falls below tolerance.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg

from config import Config

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BarrierSettings:
    mu: float = Config.BARRIER_MU
    t0: float = Config.BARRIER_T0
    tol: float = Config.INNER_TOL
    max_newton_iters: int = Config.MAX_NEWTON_ITERS
    newton_tol: float = 1e-10
    armijo: float = 0.2
    backtrack: float = 0.5
    max_backtracks: int = 60

    def validate(self) -> None:
        if self.mu <= 1:
            raise ValueError(f"barrier factor mu must exceed 1 (got {self.mu})")
        if self.t0 <= 0 or self.tol <= 0 or self.newton_tol <= 0:
            raise ValueError("barrier t0 and tolerances must be positive")
        if not 0 < self.armijo < 0.5:
            raise ValueError("armijo ratio must lie in (0, 0.5)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking ratio must lie in (0, 1)")


@dataclass
class BarrierResult:
    z: np.ndarray
    value: float
    gap_bound: float
    status: str  # 'optimal' | 'stalled' | 'stopped'
    newton_iters: int
    outer_iters: int


class BarrierProblem(ABC):
    """Convex program in inequality form."""

    @abstractmethod
    def objective(self, z: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        """
        Objective value, gradient and Hessian at z.

        Returns:
            (value, gradient (n,), Hessian (n, n))
        """
        pass

    @abstractmethod
    def constraints(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Constraint values g(z) (m,) and their Jacobian (m, n).
        """
        pass

    def constraint_hessian(self, z: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Sum of weights[i] * Hessian of g_i at z. Zero for linear constraints."""
        return np.zeros((z.size, z.size))

    def in_domain(self, z: np.ndarray) -> bool:
        """Whether f and g are defined at z."""
        return bool(np.all(np.isfinite(z)))

    def strictly_feasible(self, z: np.ndarray) -> bool:
        if not self.in_domain(z):
            return False
        g, _ = self.constraints(z)
        return bool(np.all(np.isfinite(g)) and np.all(g < 0))


def _barrier_value(problem: BarrierProblem, z: np.ndarray, t: float) -> float:
    if not problem.in_domain(z):
        return np.inf
    g, _ = problem.constraints(z)
    if not np.all(np.isfinite(g)) or np.any(g >= 0):
        return np.inf
    value, _, _ = problem.objective(z)
    return t * value - float(np.sum(np.log(-g)))


def _newton_direction(problem: BarrierProblem, z: np.ndarray, t: float) -> Tuple[np.ndarray, float, np.ndarray]:
    _, grad_f, hess_f = problem.objective(z)
    g, jac = problem.constraints(z)
    inv = 1.0 / (-g)
    grad = t * grad_f + jac.T @ inv
    hess = t * hess_f + (jac.T * inv ** 2) @ jac + problem.constraint_hessian(z, inv)
    hess = 0.5 * (hess + hess.T)
    try:
        factor = scipy.linalg.cho_factor(hess, check_finite=False)
        direction = -scipy.linalg.cho_solve(factor, grad, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        direction = -np.linalg.lstsq(hess, grad, rcond=None)[0]
    decrement_sq = float(-grad @ direction)
    return direction, decrement_sq, grad


def _center(problem: BarrierProblem, z: np.ndarray, t: float, settings: BarrierSettings,
            early_stop: Optional[Callable[[np.ndarray], bool]]) -> Tuple[np.ndarray, int, str]:
    """Damped Newton centering at barrier parameter t."""
    current = _barrier_value(problem, z, t)
    for iteration in range(settings.max_newton_iters):
        direction, decrement_sq, grad = _newton_direction(problem, z, t)
        if not np.isfinite(decrement_sq) or decrement_sq < 0:
            return z, iteration, 'stalled'
        if decrement_sq / 2.0 <= settings.newton_tol:
            return z, iteration, 'centered'

        step = 1.0
        slope = settings.armijo * float(grad @ direction)
        for _ in range(settings.max_backtracks):
            candidate = z + step * direction
            value = _barrier_value(problem, candidate, t)
            if value <= current + step * slope:
                break
            step *= settings.backtrack
        else:
            return z, iteration, 'stalled'

        z, current = candidate, value
        if early_stop is not None and early_stop(z):
            return z, iteration + 1, 'stopped'
    return z, settings.max_newton_iters, 'centered'


def minimize(problem: BarrierProblem, z0: np.ndarray, settings: Optional[BarrierSettings] = None,
             early_stop: Optional[Callable[[np.ndarray], bool]] = None) -> BarrierResult:
    """
    Run the barrier method from a strictly feasible point.

    Args:
        problem: convex program
        z0: strictly feasible starting point
        settings: barrier parameters
        early_stop: optional predicate checked after every Newton step

    Returns:
        BarrierResult with the final point and the duality-gap bound m/t

    Raises:
        ValueError: if z0 is not strictly feasible
    """
    settings = settings or BarrierSettings()
    z = np.array(z0, dtype=float)
    if not problem.strictly_feasible(z):
        raise ValueError("starting point is not strictly feasible")

    g, _ = problem.constraints(z)
    m = len(g)
    t = settings.t0
    newton_total = 0
    outer = 0
    status = 'optimal'
    while True:
        outer += 1
        z, iters, outcome = _center(problem, z, t, settings, early_stop)
        newton_total += iters
        if outcome == 'stopped':
            status = 'stopped'
            break
        if outcome == 'stalled':
            status = 'stalled'
        if m == 0 or m / t < settings.tol:
            break
        t *= settings.mu

    value, _, _ = problem.objective(z)
    gap = m / t if m else 0.0
    if status == 'stalled':
        logger.debug(f"Barrier centering stalled (gap bound {gap:.3e}, {newton_total} Newton steps)")
    return BarrierResult(z=z, value=float(value), gap_bound=gap, status=status,
                         newton_iters=newton_total, outer_iters=outer)


class _PhaseOne(BarrierProblem):
    """minimize s subject to g_i(z) <= s and s >= -1."""

    def __init__(self, inner: BarrierProblem):
        self.inner = inner

    def objective(self, w):
        grad = np.zeros(w.size)
        grad[-1] = 1.0
        return float(w[-1]), grad, np.zeros((w.size, w.size))

    def constraints(self, w):
        z, s = w[:-1], w[-1]
        g, jac = self.inner.constraints(z)
        values = np.append(g - s, -s - 1.0)
        full = np.zeros((len(g) + 1, w.size))
        full[:len(g), :-1] = jac
        full[:len(g), -1] = -1.0
        full[-1, -1] = -1.0
        return values, full

    def constraint_hessian(self, w, weights):
        n = w.size
        hess = np.zeros((n, n))
        hess[:-1, :-1] = self.inner.constraint_hessian(w[:-1], weights[:-1])
        return hess

    def in_domain(self, w):
        return self.inner.in_domain(w[:-1])


def phase_one(problem: BarrierProblem, z0: np.ndarray, settings: Optional[BarrierSettings] = None,
              margin: float = 1e-9) -> Optional[np.ndarray]:
    """
    Find a strictly feasible point, starting anywhere inside the domain.

    Returns:
        A point with all g_i < 0, or None when the constraints admit none
    """
    z0 = np.array(z0, dtype=float)
    if problem.strictly_feasible(z0):
        return z0
    if not problem.in_domain(z0):
        raise ValueError("phase I start lies outside the problem domain")
    g, _ = problem.constraints(z0)
    w0 = np.append(z0, max(float(np.max(g)), 0.0) + 1.0)
    result = minimize(_PhaseOne(problem), w0, settings, early_stop=lambda w: w[-1] < -margin)
    if result.z[-1] < 0 and problem.strictly_feasible(result.z[:-1]):
        return result.z[:-1]
    logger.debug(f"Phase I found no interior point (best max violation {result.z[-1]:.3e})")
    return None
