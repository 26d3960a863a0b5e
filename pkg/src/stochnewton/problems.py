"""Finite-sum objectives f(x) = (1/n) sum_i f_i(x) and their component oracles.

Every problem exposes ``component(i, x) -> (value, gradient, hessian)`` with
0-based ``i``.  Hessians are dense ``d x d`` arrays; the sparse outer-product
structure of GLMs is only exploited by :mod:`stochnewton.glm_fast`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit

from .errors import ValidationError

Array = np.ndarray

# sup_t |d^3/dt^3 log(1 + exp(-t))|, attained where s(1-s)(1-2s) peaks
LOGISTIC_THIRD_DERIV_MAX = 1.0 / (6.0 * np.sqrt(3.0))


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FullEval:
    """Value, gradient and (optionally) Hessian of the averaged objective."""

    value: float
    gradient: Array
    hessian: Optional[Array] = None


class FiniteSumProblem:
    """Base class for objectives with ``n`` components in ``R^d``.

    Subclasses implement ``_component(i, x)``; this class adds argument
    validation and the averaged (full) oracle.

    Attributes
    ----------
    n, d : int
        Number of components and dimension.
    mu : float
        Strong-convexity parameter shared by every component, 0 when unknown.
    hess_lip : float
        Hessian Lipschitz constant of every component, 0 when unknown (or
        when the components are quadratic).
    """

    n: int
    d: int
    mu: float = 0.0
    hess_lip: float = 0.0

    def _component(self, i: int, x: Array):
        raise NotImplementedError

    def _check_x(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValidationError(f"expected a vector of length {self.d}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValidationError("point has non-finite entries")
        return x

    def _check_index(self, i) -> int:
        if not 0 <= int(i) < self.n or int(i) != i:
            raise ValidationError(f"component index {i} out of range [0, {self.n})")
        return int(i)

    def component(self, i: int, x) -> tuple[float, Array, Array]:
        """Value, gradient and Hessian of component ``i`` at ``x``."""
        return self._component(self._check_index(i), self._check_x(x))

    def component_value(self, i: int, x) -> float:
        return self.component(i, x)[0]

    def full(self, x, want_hessian: bool = True) -> FullEval:
        """Average of the component oracles at ``x``."""
        x = self._check_x(x)
        val = 0.0
        grad = np.zeros(self.d)
        hess = np.zeros((self.d, self.d)) if want_hessian else None
        for i in range(self.n):
            v, g, h = self._component(i, x)
            val += v
            grad += g
            if want_hessian:
                hess += h
        hess = hess / self.n if want_hessian else None
        return FullEval(val / self.n, grad / self.n, hess)

    def value(self, x) -> float:
        return self.full(x, want_hessian=False).value

    def gradient(self, x) -> Array:
        return self.full(x, want_hessian=False).gradient


def eval_component(problem: FiniteSumProblem, i: int, x):
    """Module-level alias for ``problem.component(i, x)``."""
    return problem.component(i, x)


def eval_full(problem: FiniteSumProblem, x, want_hessian: bool = True) -> FullEval:
    return problem.full(x, want_hessian)


class QuadraticProblem(FiniteSumProblem):
    """Components ``f_i(x) = 0.5 (x - c_i)^T A_i (x - c_i)``.

    ``mu`` is the smallest eigenvalue over all ``A_i`` and ``hess_lip`` is 0,
    both exact.  The minimizer is available in closed form as ``x_star``.
    """

    def __init__(self, As, cs):
        As = np.asarray(As, dtype=float)
        cs = np.asarray(cs, dtype=float)
        if As.ndim == 1:  # scalar curvatures for d = 1
            As = As[:, None, None]
        if cs.ndim == 1:
            cs = cs[:, None]
        if As.ndim != 3 or As.shape[1] != As.shape[2] or cs.shape != As.shape[:2]:
            raise ValidationError("need As of shape (n, d, d) and cs of shape (n, d)")
        if not np.allclose(As, As.transpose(0, 2, 1), rtol=0, atol=1e-12 * max(1.0, np.abs(As).max())):
            raise ValidationError("component matrices must be symmetric")
        As = 0.5 * (As + As.transpose(0, 2, 1))
        self.As = _frozen(As)
        self.cs = _frozen(cs)
        self.n, self.d = cs.shape
        self.mu = float(min(np.linalg.eigvalsh(A)[0] for A in As))
        self.hess_lip = 0.0

    def _component(self, i, x):
        r = x - self.cs[i]
        Ar = self.As[i] @ r
        return 0.5 * float(r @ Ar), Ar, np.array(self.As[i])

    @property
    def x_star(self) -> Array:
        A = self.As.sum(axis=0)
        rhs = np.einsum("nij,nj->i", self.As, self.cs)
        return np.linalg.solve(A, rhs)


class CallableProblem(FiniteSumProblem):
    """Finite sum built from user callables ``(value, gradient, hessian)``.

    Handy for small hand-built examples; scalars are promoted so that a 1-D
    problem may return floats.
    """

    def __init__(self, components: Sequence[tuple[Callable, Callable, Callable]], d: int,
                 mu: float = 0.0, hess_lip: float = 0.0):
        if not components:
            raise ValidationError("need at least one component")
        self._funcs = tuple(components)
        self.n = len(self._funcs)
        self.d = int(d)
        self.mu = float(mu)
        self.hess_lip = float(hess_lip)

    def _component(self, i, x):
        f, g, h = self._funcs[i]
        grad = np.atleast_1d(np.asarray(g(x), dtype=float)).reshape(self.d)
        hess = np.atleast_2d(np.asarray(h(x), dtype=float)).reshape(self.d, self.d)
        return float(f(x)), grad, hess


def logistic_scalar(t, b):
    """Logistic loss ``log(1 + exp(-b t))`` with first and second derivatives.

    Works elementwise on arrays.  Uses ``logaddexp`` and ``expit`` so that no
    intermediate overflows, and forms the curvature as ``s * (1 - s)`` with
    ``1 - s`` evaluated as ``expit(-bt)`` to avoid cancellation.
    """
    bt = np.multiply(b, t)
    phi = np.logaddexp(0.0, -bt)
    dphi = -np.multiply(b, expit(-bt))
    ddphi = expit(bt) * expit(-bt)
    if np.ndim(phi) == 0:
        return float(phi), float(dphi), float(ddphi)
    return phi, dphi, ddphi


def logistic_third(t, b):
    """Third derivative of ``log(1 + exp(-b t))`` in ``t``."""
    bt = np.multiply(b, t)
    s = expit(bt)
    return np.multiply(b, s * expit(-bt) * (1.0 - 2.0 * s))


def squared_scalar(t, b):
    """Squared loss ``0.5 (t - b)^2`` and its derivatives."""
    r = np.subtract(t, b)
    return 0.5 * r * r, r, np.ones_like(r) if np.ndim(r) else 1.0


LOSSES = {"logistic": logistic_scalar, "squared": squared_scalar}


class GlmProblem(FiniteSumProblem):
    """L2-regularized generalized linear model.

    Component ``i`` owns a block of data rows ``R_i`` and equals

        f_i(x) = mean_{r in R_i} phi(a_r^T x; b_r) + (lam / 2) ||x||^2.

    With one row per block this is exactly ``phi_i(a_i^T x) + lam/2 ||x||^2``.

    Parameters
    ----------
    A : array_like, shape (rows, d)
        Feature rows (dense).
    b : array_like, shape (rows,)
        Labels; must be +-1 for the logistic loss.
    lam : float
        Ridge weight, ``lam >= 0``.
    loss : {"logistic", "squared"}
    blocks : sequence of index arrays, optional
        Row blocks forming the components.  Defaults to one row per component.
    """

    def __init__(self, A, b, lam: float, loss: str = "logistic", blocks=None):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise ValidationError("A must be (rows, d) and b must have one label per row")
        if loss not in LOSSES:
            raise ValidationError(f"unknown loss {loss!r}; choose from {sorted(LOSSES)}")
        if loss == "logistic" and not np.all(np.isin(b, (-1.0, 1.0))):
            raise ValidationError("logistic loss needs labels in {-1, +1}")
        if not lam >= 0 or not np.isfinite(lam):
            raise ValidationError("lambda must be a finite nonnegative number")
        if blocks is None:
            blocks = [np.array([r]) for r in range(A.shape[0])]
        blocks = tuple(_frozen(blk, dtype=np.intp) for blk in blocks)
        if not blocks or any(len(blk) == 0 for blk in blocks):
            raise ValidationError("every component needs at least one row")
        self.A = _frozen(A)
        self.b = _frozen(b)
        self.lam = float(lam)
        self.loss = loss
        self.blocks = blocks
        self.n = len(blocks)
        self.d = A.shape[1]
        self._phi = LOSSES[loss]
        # per-row weight 1/(n |R_i|): full oracle is a weighted sum over rows
        w = np.zeros(A.shape[0])
        owner = np.full(A.shape[0], -1, dtype=np.intp)
        for i, blk in enumerate(blocks):
            w[blk] += 1.0 / (self.n * len(blk))
            owner[blk] = i
        self.row_weight = _frozen(w)
        self.row_owner = _frozen(owner, dtype=np.intp)
        self.mu = self.lam
        self.hess_lip = 0.0

    @property
    def rows(self) -> int:
        return self.A.shape[0]

    @property
    def single_row(self) -> bool:
        return all(len(blk) == 1 for blk in self.blocks)

    def _component(self, i, x):
        rows = self.blocks[i]
        Ai = self.A[rows]
        phi, dphi, ddphi = self._phi(Ai @ x, self.b[rows])
        m = len(rows)
        val = float(np.sum(phi)) / m + 0.5 * self.lam * float(x @ x)
        grad = Ai.T @ np.atleast_1d(dphi) / m + self.lam * x
        hess = (Ai.T * np.atleast_1d(ddphi)) @ Ai / m
        hess[np.diag_indices_from(hess)] += self.lam
        return val, grad, hess

    def full(self, x, want_hessian: bool = True) -> FullEval:
        x = self._check_x(x)
        phi, dphi, ddphi = self._phi(self.A @ x, self.b)
        w = self.row_weight
        val = float(w @ np.atleast_1d(phi)) + 0.5 * self.lam * float(x @ x)
        grad = self.A.T @ (w * dphi) + self.lam * x
        hess = None
        if want_hessian:
            hess = (self.A.T * (w * ddphi)) @ self.A
            hess[np.diag_indices_from(hess)] += self.lam
        return FullEval(val, grad, hess)

    def certified_constants(self) -> tuple[float, float]:
        """Return ``(mu, H)`` valid for every component, globally.

        ``mu = lam`` because the loss curvature is nonnegative.  For the
        logistic loss ``|phi'''| <= 1/(6 sqrt 3)`` and the Hessian of a
        one-row component varies as ``|phi''(a^T x) - phi''(a^T y)| ||a||^2``,
        giving ``H_i = mean_{r in R_i} ||a_r||^3 / (6 sqrt 3)``.
        """
        if self.loss == "squared":
            return self.lam, 0.0
        norms3 = np.linalg.norm(self.A, axis=1) ** 3
        H = max(float(norms3[blk].mean()) for blk in self.blocks)
        return self.lam, H * LOGISTIC_THIRD_DERIV_MAX


def estimate_constants(problem: FiniteSumProblem, sample_points) -> tuple[float, float]:
    """Empirical surrogates for the strong-convexity and Hessian-Lipschitz constants.

    ``mu_hat`` is the smallest component-Hessian eigenvalue seen at the sample
    points and ``hess_lip_hat`` the largest spectral-norm difference quotient
    over point pairs.  Neither value is a certificate: sampling can only
    overestimate ``mu`` and underestimate ``H``.
    """
    pts = [problem._check_x(p) for p in sample_points]
    if len(pts) < 2:
        raise ValidationError("need at least two sample points")
    hess = [[problem.component(i, p)[2] for i in range(problem.n)] for p in pts]
    mu_hat = min(np.linalg.eigvalsh(h)[0] for row in hess for h in row)
    lip = None
    for (p, hp), (q, hq) in itertools.combinations(zip(pts, hess), 2):
        dist = np.linalg.norm(p - q)
        if dist == 0.0:
            continue
        ratio = max(np.linalg.norm(a - b, 2) for a, b in zip(hp, hq)) / dist
        lip = ratio if lip is None else max(lip, ratio)
    if lip is None:
        raise ValidationError("all sample points coincide")
    return float(mu_hat), float(lip)
