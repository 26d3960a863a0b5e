"""Deterministic reference methods and the high-accuracy optimum solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cubic import solve_single_anchor
from .errors import NonConvergenceError, SolverError, ValidationError
from .problems import FiniteSumProblem
from .sn import SnState, assemble, sn_step, solve_spd

Array = np.ndarray


@dataclass(frozen=True)
class ReferenceSolution:
    x_star: Array
    f_star: float
    grad_norm: float
    iterations: int
    method: str


def newton_step(problem: FiniteSumProblem, x, singular: str = "error") -> Array:
    """Undamped Newton step ``x - hess(x)^{-1} grad(x)``.

    Assembled in the anchored form ``(sum hess_i)^{-1} sum (hess_i x - grad_i)``
    shared with SN, so SN with ``tau = n`` reproduces these iterates exactly.
    """
    x = problem._check_x(x)
    hess_sum, rhs_sum = assemble(problem, np.broadcast_to(x, (problem.n, problem.d)))
    return solve_spd(hess_sum, rhs_sum, singular)


def cubic_newton_step(problem: FiniteSumProblem, x, M: float, tol: float = 1e-12) -> Array:
    """Full cubic-regularized Newton step from ``x``.

    Minimizes ``<grad f(x), y> + 1/2 y^T hess f(x) y + (M/6)||y||^3`` over the
    step ``y``.
    """
    if not M > 0:
        raise ValidationError("M must be positive")
    x = problem._check_x(x)
    ev = problem.full(x)
    # linear coefficient in absolute coordinates so that g + H x = grad f(x)
    return solve_single_anchor(ev.gradient - ev.hessian @ x, ev.hessian, x, M, tol)


def cyclic_sampler(state) -> Array:
    """Index ``k mod n``: the incremental (cyclic) order."""
    return np.array([state.k % state.n])


def incremental_newton_step(state: SnState, problem: FiniteSumProblem) -> Array:
    """SN step whose refreshed index cycles ``0, 1, ..., n-1, 0, ...``."""
    if state.tau != 1:
        raise ValidationError("incremental Newton needs a tau = 1 state")
    return sn_step(state, problem, sampler=cyclic_sampler)


def _grad_norm(problem, x) -> float:
    return float(np.linalg.norm(problem.gradient(x)))


def solve_reference(problem: FiniteSumProblem, tol: float = 1e-12, x0=None,
                    M_fallback: float = 1.0, max_iter: int = 200) -> ReferenceSolution:
    """High-accuracy minimizer for suboptimality and distance traces.

    Runs Newton's method (``x - H^{-1} g`` form) from ``x0`` (zeros by default)
    until ``||grad f|| <= tol``.  If the gradient norm grows on three
    consecutive steps, or the Hessian is singular, restarts from ``x0`` with
    cubic Newton using ``M_fallback``.

    Raises
    ------
    NonConvergenceError
        When neither strategy reaches ``tol``; ``best`` holds the iterate with
        the smallest gradient norm seen.
    """
    if not tol > 0:
        raise ValidationError("tol must be positive")
    x0 = np.zeros(problem.d) if x0 is None else problem._check_x(x0)
    best = (np.inf, x0)

    def newton_update(x):
        ev = problem.full(x)
        return x - solve_spd(ev.hessian, ev.gradient)

    def cubic_update(x):
        return cubic_newton_step(problem, x, M_fallback)

    for method, update in (("newton", newton_update), ("cubic_newton", cubic_update)):
        x = x0.copy()
        gnorm = _grad_norm(problem, x)
        rises = 0
        for it in range(max_iter + 1):
            if not np.isfinite(gnorm):
                break
            if gnorm < best[0]:
                best = (gnorm, x.copy())
            if gnorm <= tol:
                return ReferenceSolution(x, problem.value(x), gnorm, it, method)
            if it == max_iter:
                break
            try:
                x_new = update(x)
            except SolverError:
                break
            if not np.all(np.isfinite(x_new)):
                break
            g_new = _grad_norm(problem, x_new)
            rises = rises + 1 if g_new > gnorm else 0
            x, gnorm = x_new, g_new
            if rises >= 3:
                break
    raise NonConvergenceError(f"reference solve did not reach ||grad|| <= {tol:g} "
                              f"(best {best[0]:.3e})", residual=best[0], best=best[1])
