"""Stochastic Newton (SN) over a generic finite-sum problem.

The state keeps one anchor ``w_i`` per component together with the running
sums ``sum_i hess_i(w_i)`` and ``sum_i [hess_i(w_i) w_i - grad_i(w_i)]``.
Each step solves one linear system with those sums and then moves a random
subset of ``tau`` anchors to the new point.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import SingularMatrixError, ValidationError
from .problems import FiniteSumProblem

Array = np.ndarray

SINGULAR_POLICIES = ("error", "jitter")


def sample_subset(rng: np.random.Generator, n: int, tau: int) -> Array:
    """Uniform random ``tau``-subset of ``range(n)``, sorted.

    Partial Fisher-Yates: the first ``tau`` slots of a shuffled index array.
    """
    idx = np.arange(n)
    for j in range(tau):
        r = int(rng.integers(j, n))
        idx[j], idx[r] = idx[r], idx[j]
    return np.sort(idx[:tau])


def solve_spd(H: Array, b: Array, singular: str = "error") -> Array:
    """Solve ``H x = b`` by Cholesky.

    With ``singular="jitter"`` a failed factorization is retried once after
    adding ``1e-10 * trace(H)/d`` to the diagonal.
    """
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), b)
    except np.linalg.LinAlgError:
        if singular != "jitter":
            raise SingularMatrixError("system matrix is not positive definite") from None
    shift = 1e-10 * np.trace(H) / H.shape[0]
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(H + shift * np.eye(H.shape[0])), b)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("system matrix is not positive definite, even after jitter") from None


def _terms(problem: FiniteSumProblem, i: int, w: Array):
    _, g, h = problem.component(i, w)
    return h, h @ w - g


def assemble(problem: FiniteSumProblem, anchors: Array) -> tuple[Array, Array]:
    """Fresh ``(hess_sum, rhs_sum)`` for the given anchors (not averaged)."""
    hess_sum = np.zeros((problem.d, problem.d))
    rhs_sum = np.zeros(problem.d)
    for i in range(problem.n):
        h, r = _terms(problem, i, anchors[i])
        hess_sum += h
        rhs_sum += r
    return hess_sum, rhs_sum


def _broadcast_anchors(problem: FiniteSumProblem, anchors0) -> Array:
    anchors = np.array(anchors0, dtype=float)
    if anchors.ndim == 1:
        anchors = np.tile(anchors, (problem.n, 1))
    if anchors.shape != (problem.n, problem.d):
        raise ValidationError(
            f"anchors must have shape ({problem.d},) or ({problem.n}, {problem.d}), got {anchors.shape}")
    if not np.all(np.isfinite(anchors)):
        raise ValidationError("anchors have non-finite entries")
    return anchors


def _check_tau(problem, tau) -> int:
    if int(tau) != tau or not 1 <= tau <= problem.n:
        raise ValidationError(f"tau must be an integer in [1, {problem.n}], got {tau}")
    return int(tau)


@dataclass
class SnState:
    """Mutable SN state; owned by one caller and advanced by :func:`sn_step`.

    ``evals`` counts component oracle calls at new points (the epoch
    numerator); ``recomputes`` counts calls that re-derive an outgoing
    anchor's terms.
    """

    anchors: Array
    hess_sum: Array
    rhs_sum: Array
    tau: int
    rng: np.random.Generator
    singular: str = "error"
    x: Optional[Array] = None
    k: int = 0
    evals: int = 0
    recomputes: int = 0
    last_subset: Optional[Array] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.anchors.shape[0]

    def next_iterate(self) -> Array:
        """The point the next :func:`sn_step` will return (no state change)."""
        return solve_spd(self.hess_sum, self.rhs_sum, self.singular)


def sn_init(problem: FiniteSumProblem, anchors0, tau: int = 1, seed: Optional[int] = None,
            singular: str = "error") -> SnState:
    """Build an SN state from initial anchors (one vector is broadcast to all)."""
    tau = _check_tau(problem, tau)
    if singular not in SINGULAR_POLICIES:
        raise ValidationError(f"singular policy must be one of {SINGULAR_POLICIES}")
    anchors = _broadcast_anchors(problem, anchors0)
    hess_sum, rhs_sum = assemble(problem, anchors)
    return SnState(anchors, hess_sum, rhs_sum, tau, np.random.default_rng(seed), singular)


def replace_anchors(state, problem: FiniteSumProblem, subset, x_new: Array) -> None:
    """Move anchors in ``subset`` to ``x_new`` and patch the sums in place.

    When every anchor moves the sums are rebuilt from scratch instead, which
    makes the full-batch case reproduce deterministic Newton exactly.
    """
    if len(subset) == problem.n:
        state.anchors[:] = x_new
        state.hess_sum, state.rhs_sum = assemble(problem, state.anchors)
        state.evals += problem.n
        return
    for i in subset:
        h_old, r_old = _terms(problem, i, state.anchors[i])
        h_new, r_new = _terms(problem, i, x_new)
        state.hess_sum += h_new - h_old
        state.rhs_sum += r_new - r_old
        state.anchors[i] = x_new
    state.evals += len(subset)
    state.recomputes += len(subset)


def sn_step(state: SnState, problem: FiniteSumProblem,
            sampler: Optional[Callable[[SnState], Array]] = None) -> Array:
    """One SN iteration; returns ``x^{k+1}``.

    ``sampler(state)`` may replace the uniform subset draw (used for the
    cyclic incremental-Newton baseline and for rigged tests).
    """
    x_next = state.next_iterate()
    subset = sample_subset(state.rng, state.n, state.tau) if sampler is None else np.asarray(sampler(state))
    replace_anchors(state, problem, subset, x_next)
    state.last_subset = subset
    state.x = x_next
    state.k += 1
    return x_next


def sn_drift(state: SnState, problem: FiniteSumProblem) -> tuple[float, float]:
    """Relative gap between maintained and freshly assembled sums."""
    h, r = assemble(problem, state.anchors)
    dh = np.linalg.norm(state.hess_sum - h) / max(np.linalg.norm(h), 1e-300)
    dr = np.linalg.norm(state.rhs_sum - r) / max(np.linalg.norm(r), 1e-300)
    return float(dh), float(dr)


def lyapunov_w(anchors, x_star) -> float:
    """Average squared distance of the anchors to ``x_star``.

    Accepts an :class:`SnState` (or anything with ``anchors``) or the raw
    ``(n, d)`` anchor array.
    """
    anchors = getattr(anchors, "anchors", anchors)
    diff = np.asarray(anchors) - np.asarray(x_star)
    return float(np.mean(np.sum(diff * diff, axis=1)))


def expected_next_w(state: SnState, problem: FiniteSumProblem, x_star,
                    max_subsets: int = 100_000) -> tuple[float, Optional[float]]:
    """Conditional expectation of the next W, two ways.

    ``exact`` uses the closed form ``(tau/n)||x+ - x*||^2 + (1 - tau/n) W``;
    ``enumerated`` averages W over every possible subset and is ``None`` when
    there are more than ``max_subsets`` of them.
    """
    n, tau = state.n, state.tau
    x_next = state.next_iterate()
    W = lyapunov_w(state, x_star)
    e = float(np.sum((x_next - x_star) ** 2))
    exact = tau / n * e + (1.0 - tau / n) * W
    if math.comb(n, tau) > max_subsets:
        return exact, None
    dists = np.sum((state.anchors - x_star) ** 2, axis=1)
    total = 0.0
    count = 0
    for subset in itertools.combinations(range(n), tau):
        moved = dists.copy()
        moved[list(subset)] = e
        total += moved.mean()
        count += 1
    return exact, total / count


def check_distance_bound(state: SnState, problem: FiniteSumProblem, x_star, H_cert: float,
                         mu_cert: float) -> tuple[float, float, bool]:
    """Distance bound ``||x+ - x*|| <= H / (2 mu) * W`` for the pending step."""
    if not mu_cert > 0:
        raise ValidationError("mu_cert must be positive")
    lhs = float(np.linalg.norm(state.next_iterate() - x_star))
    rhs = H_cert / (2.0 * mu_cert) * lyapunov_w(state, x_star)
    return lhs, rhs, lhs <= rhs + 1e-12


def w_recursion_factor(W: float, tau: int, n: int, H: float, mu: float) -> float:
    """Contraction factor ``1 - tau/n + (tau/n) (H / 2mu)^2 W`` of the W recursion."""
    return 1.0 - tau / n + tau / n * (H / (2.0 * mu)) ** 2 * W
