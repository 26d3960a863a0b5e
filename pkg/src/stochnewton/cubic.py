"""Cubic-regularized quadratic subproblems.

The general problem is

    min_x  g^T x + 1/2 x^T H x + (M/6) * (1/n) sum_i ||x - w_i||^3

with ``H`` symmetric positive semidefinite.  The cube penalty uses either the
Euclidean norm (``mode="l2"``) or the l3 norm (``mode="l3"``, separable over
coordinates).  Three solvers are provided:

* :func:`prox_cubic` -- closed-form prox of one Euclidean cube term;
* :func:`solve_single_anchor` -- one anchor, via the secular equation;
* :func:`solve_multi_anchor` -- many anchors, damped Newton (default) or
  proximal gradient with an exact prox of the averaged penalty.

Both penalties are convex and twice continuously differentiable, so the
subproblem objective is smooth and convex.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import NonConvergenceError, ValidationError

Array = np.ndarray

MODES = ("l2", "l3")
INNER_TOL = 1e-9
INNER_MAX_ITER = 100_000
_NOISE = 1e3 * np.finfo(float).eps


def prox_cubic(v, w, sigma: float) -> Array:
    """``argmin_x sigma ||x - w||^3 + 1/2 ||x - v||^2``.

    The minimizer lies on the segment from ``w`` to ``v`` at distance
    ``s`` from ``w`` where ``3 sigma s^2 + s = ||v - w||``.
    """
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    u = v - w
    r = float(np.linalg.norm(u))
    if r == 0.0:
        return w.copy()
    # stable root of 3 sigma s^2 + s - r = 0
    s = 2.0 * r / (1.0 + np.sqrt(1.0 + 12.0 * sigma * r))
    return w + u * (s / r)


def solve_single_anchor(g, H, w, M: float, tol: float = 1e-12, max_iter: int = 200) -> Array:
    """Minimize ``g^T x + 1/2 x^T H x + (M/6) ||x - w||^3``.

    With ``y = x - w`` and ``gt = g + H w`` the stationarity condition is
    ``(H + (M/2) r I) y = -gt`` with ``r = ||y||``.  After an eigendecomposition
    of ``H`` the scalar equation ``||(Lambda + (M/2) r)^{-1} Q^T gt|| = r`` is
    monotone in ``r`` and is solved by Brent's method on a guaranteed bracket.

    Raises
    ------
    NonConvergenceError
        If the root finder needs more than ``max_iter`` iterations.
    """
    if not M > 0:
        raise ValidationError("M must be positive")
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    w = np.asarray(w, dtype=float)
    gt = g + H @ w
    gnorm = float(np.linalg.norm(gt))
    if gnorm == 0.0:
        return w.copy()
    lam, Q = np.linalg.eigh(0.5 * (H + H.T))
    if lam[0] < -1e-10 * max(1.0, abs(lam[-1])):
        raise ValidationError("H must be positive semidefinite")
    lam = np.maximum(lam, 0.0)
    gh = Q.T @ gt
    half_m = 0.5 * M

    def gap(r):
        return np.linalg.norm(gh / (lam + half_m * r)) - r

    lmax = float(lam[-1])
    r_lo = 2.0 * gnorm / (lmax + np.sqrt(lmax * lmax + 2.0 * M * gnorm))
    r_hi = np.sqrt(2.0 * gnorm / M)
    if gap(r_lo) <= 0.0:
        r = r_lo
    elif gap(r_hi) >= 0.0:
        r = r_hi
    else:
        try:
            r = scipy.optimize.brentq(gap, r_lo, r_hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                                      maxiter=max_iter)
        except RuntimeError as exc:
            raise NonConvergenceError(f"secular equation did not converge: {exc}") from None
    y = -Q @ (gh / (lam + half_m * r))
    return w + y


def single_anchor_residual(g, H, w, M: float, x) -> float:
    """Stationarity residual ``||gt + H y + (M/2)||y|| y||`` at ``x = w + y``."""
    y = np.asarray(x) - w
    gt = g + H @ w
    return float(np.linalg.norm(gt + H @ y + 0.5 * M * np.linalg.norm(y) * y))


def l3_sums(anchors) -> tuple[Array, Array, float, int]:
    """``(sum w_i, sum w_i^2, sum ||w_i||_3^3, n)`` with coordinatewise squares."""
    W = np.atleast_2d(np.asarray(anchors, dtype=float))
    return W.sum(axis=0), (W * W).sum(axis=0), float(np.sum(np.abs(W) ** 3)), W.shape[0]


def l3_penalty_eval(x, sums, M: float) -> tuple[float, Array]:
    """Sum-based expansion of the averaged l3 cube penalty, scaled by ``M/6``.

    Evaluates ``||x||_3^3 - 3 <x^2, mean w> + 3 <x, mean w^2> - mean ||w||_3^3``
    and its gradient from running sums only, in O(d).

    The expansion agrees with ``(1/n) sum_i ||x - w_i||_3^3`` only where every
    cube keeps its sign, i.e. ``x_j >= w_ij >= 0`` for all ``i, j`` (see
    :func:`l3_expansion_valid`); elsewhere it is a different, possibly
    nonconvex function.  The solvers therefore use :func:`cube_penalty`.
    """
    x = np.asarray(x, dtype=float)
    s1, s2, s3, n = sums
    m1, m2 = np.asarray(s1) / n, np.asarray(s2) / n
    value = np.sum(np.abs(x) ** 3) - 3.0 * float(x * x @ m1) + 3.0 * float(x @ m2) - s3 / n
    grad = 3.0 * np.abs(x) * x - 6.0 * x * m1 + 3.0 * m2
    return M / 6.0 * float(value), M / 6.0 * grad


def l3_expansion_valid(x, anchors) -> bool:
    """True when :func:`l3_penalty_eval` equals the exact averaged penalty at ``x``."""
    W = np.atleast_2d(anchors)
    return bool(np.all(W >= 0.0) and np.all(np.asarray(x) >= W))


def cube_penalty(x, anchors, mode: str = "l2", want_hessian: bool = True):
    """``(1/n) sum_i ||x - w_i||^3`` in the chosen norm, with derivatives.

    The Euclidean term has gradient ``3 ||u|| u`` and Hessian
    ``3 (||u|| I + u u^T / ||u||)``; the l3 term is separable with gradient
    ``3 |u| u`` and diagonal Hessian ``6 |u|``.
    """
    W = np.atleast_2d(anchors)
    U = np.asarray(x) - W
    n, d = W.shape
    if mode == "l2":
        norms = np.linalg.norm(U, axis=1)
        value = float(np.mean(norms ** 3))
        grad = 3.0 * (norms[:, None] * U).mean(axis=0)
        hess = None
        if want_hessian:
            safe = np.where(norms > 0.0, norms, 1.0)
            hess = 3.0 * (np.eye(d) * norms.mean() + (U.T / safe) @ U / n)
        return value, grad, hess
    if mode == "l3":
        A = np.abs(U)
        value = float(np.sum(A ** 3) / n)
        grad = 3.0 * (A * U).mean(axis=0)
        hess = np.diag(6.0 * A.mean(axis=0)) if want_hessian else None
        return value, grad, hess
    raise ValidationError(f"mode must be one of {MODES}")


@dataclass(frozen=True)
class CubicModel:
    """``const + g^T x + 1/2 x^T H x + (M/6) (1/n) sum_i ||x - w_i||^3``."""

    g: Array
    H: Array
    anchors: Array
    M: float
    const: float = 0.0
    mode: str = "l2"

    def __post_init__(self):
        if not self.M > 0:
            raise ValidationError("M must be positive")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        W = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        object.__setattr__(self, "anchors", W)
        d = W.shape[1]
        if np.shape(self.g) != (d,) or np.shape(self.H) != (d, d):
            raise ValidationError("g, H and anchors disagree on the dimension")

    @property
    def n(self) -> int:
        return self.anchors.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        pen = cube_penalty(x, self.anchors, self.mode, want_hessian=False)[0]
        return self.const + float(self.g @ x) + 0.5 * float(x @ self.H @ x) + self.M / 6.0 * pen

    def derivatives(self, x):
        x = np.asarray(x, dtype=float)
        pv, pg, ph = cube_penalty(x, self.anchors, self.mode)
        c = self.M / 6.0
        Hx = self.H @ x
        val = self.const + float(self.g @ x) + 0.5 * float(x @ Hx) + c * pv
        return val, self.g + Hx + c * pg, self.H + c * ph

    def gradient(self, x) -> Array:
        return self.derivatives(x)[1]


def _newton_direction(G: Array, grad: Array) -> Array:
    try:
        return -scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), grad)
    except np.linalg.LinAlgError:
        # singular curvature (e.g. H = 0 at an anchor): tiny ridge
        shift = 1e-12 * max(1.0, np.trace(G) / G.shape[0])
        return -np.linalg.lstsq(G + shift * np.eye(G.shape[0]), grad, rcond=None)[0]


def _damped_newton(fun, x0: Array, gtol: float, max_iter: int) -> tuple[Array, float, int]:
    """Minimize a smooth convex ``fun(x) -> (value, grad, hess)`` by Armijo-damped Newton."""
    x = np.array(x0, dtype=float)
    f, g, G = fun(x)
    gnorm = float(np.linalg.norm(g))
    for it in range(max_iter):
        if gnorm <= gtol:
            return x, gnorm, it
        p = _newton_direction(G, g)
        slope = float(g @ p)
        if slope >= 0.0:
            p, slope = -g, -gnorm ** 2
        t = 1.0
        accepted = False
        if -slope <= _NOISE * (1.0 + abs(f)):
            # predicted decrease is below rounding in f: judge the full step by the gradient
            cand = fun(x + p)
            if np.linalg.norm(cand[1]) >= gnorm:
                raise NonConvergenceError("gradient stalled at rounding level", residual=gnorm, best=x)
            x = x + p
            f, g, G = cand
            gnorm = float(np.linalg.norm(g))
            continue
        for _ in range(60):
            cand = fun(x + t * p)
            if cand[0] <= f + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # function values stalled in rounding; fall back on gradient decrease
            cand = fun(x + p)
            if np.linalg.norm(cand[1]) >= gnorm:
                raise NonConvergenceError("line search stalled", residual=gnorm, best=x)
            t = 1.0
        x = x + t * p
        f, g, G = cand
        gnorm = float(np.linalg.norm(g))
    if gnorm <= gtol:
        return x, gnorm, max_iter
    raise NonConvergenceError(f"no convergence in {max_iter} iterations", residual=gnorm, best=x)


def prox_penalty(v, anchors, sigma: float, mode: str = "l2", tol: float = 1e-13) -> Array:
    """Exact ``argmin_x sigma (1/n) sum_i ||x - w_i||^3 + 1/2 ||x - v||^2``.

    One Euclidean anchor uses :func:`prox_cubic`.  The l3 penalty separates
    into monotone scalar equations solved by bracketed Newton; the general
    Euclidean case is a smooth strongly convex problem solved by damped
    Newton.
    """
    v = np.asarray(v, dtype=float)
    W = np.atleast_2d(np.asarray(anchors, dtype=float))
    if mode == "l2":
        if W.shape[0] == 1:
            return prox_cubic(v, W[0], sigma)

        def fun(x):
            pv, pg, ph = cube_penalty(x, W, "l2")
            r = x - v
            return sigma * pv + 0.5 * float(r @ r), sigma * pg + r, sigma * ph + np.eye(len(x))

        return _damped_newton(fun, v, tol * (1.0 + np.linalg.norm(v)), 200)[0]
    if mode != "l3":
        raise ValidationError(f"mode must be one of {MODES}")
    # per coordinate: 3 sigma mean|z - w|(z - w) + (z - v) = 0, increasing in z
    lo = np.minimum(v, W.min(axis=0))
    hi = np.maximum(v, W.max(axis=0))
    z = v.copy()
    for _ in range(200):
        U = z - W
        A = np.abs(U)
        p = 3.0 * sigma * (A * U).mean(axis=0) + (z - v)
        dp = 6.0 * sigma * A.mean(axis=0) + 1.0
        lo = np.where(p < 0, z, lo)
        hi = np.where(p > 0, z, hi)
        step = z - p / dp
        inside = (step > lo) & (step < hi)
        z_new = np.where(inside, step, 0.5 * (lo + hi))
        z_new = np.where(p == 0, z, z_new)
        if np.all(np.abs(z_new - z) <= tol * (1.0 + np.abs(z))):
            return z_new
        z = z_new
    return z


def power_iteration_lmax(H: Array, rounds: int = 20, seed: int = 0) -> float:
    """Largest eigenvalue estimate of a PSD matrix by power iteration."""
    v = np.random.default_rng(seed).standard_normal(H.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(rounds):
        Hv = H @ v
        nrm = np.linalg.norm(Hv)
        if nrm == 0.0:
            return 0.0
        lam = float(v @ Hv)
        v = Hv / nrm
    return max(lam, float(v @ H @ v))


def solve_multi_anchor(model: CubicModel, mode: Optional[str] = None, tol: float = INNER_TOL,
                       max_iter: int = INNER_MAX_ITER, method: str = "newton") -> Array:
    """Minimize a :class:`CubicModel`.

    Starts from the best anchor, so the result is never worse than any
    anchor.  Converged when the (prox-)gradient residual is at most
    ``tol * (1 + ||g||)``.  When every anchor coincides in l2 mode the
    secular solver is used directly.

    Parameters
    ----------
    mode : {"l2", "l3"}, optional
        Overrides ``model.mode``.
    method : {"newton", "prox_grad"}
        Damped Newton on the smooth objective, or proximal gradient with step
        ``1/L`` (``L`` = 1.05 x power-iteration estimate of ``lambda_max(H)``)
        and the exact prox of the averaged penalty.

    Raises
    ------
    NonConvergenceError
        After ``max_iter`` iterations; carries the residual and the iterate.
    """
    if mode is not None and mode != model.mode:
        model = CubicModel(model.g, model.H, model.anchors, model.M, model.const, mode)
    W = model.anchors
    gtol = tol * (1.0 + float(np.linalg.norm(model.g)))
    if model.mode == "l2" and np.all(W == W[0]):
        return solve_single_anchor(model.g, model.H, W[0], model.M, max_iter=200)
    x0 = W[int(np.argmin([model.objective(w) for w in W]))]
    if method == "newton":
        return _damped_newton(model.derivatives, x0, gtol, max_iter)[0]
    if method != "prox_grad":
        raise ValidationError("method must be 'newton' or 'prox_grad'")
    L = 1.05 * power_iteration_lmax(model.H)
    if L <= 0.0:
        L = 1.0
    sigma = model.M / (6.0 * L)
    x = np.array(x0)
    res = np.inf
    for _ in range(max_iter):
        x_new = prox_penalty(x - (model.g + model.H @ x) / L, W, sigma, model.mode)
        res = L * float(np.linalg.norm(x_new - x))
        x = x_new
        if res <= gtol:
            return x
    raise NonConvergenceError(f"prox-gradient did not converge in {max_iter} iterations",
                              residual=res, best=x)
