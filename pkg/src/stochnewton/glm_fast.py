"""O(d^2) stochastic Newton for L2-regularized GLMs.

Instead of anchors and dense Hessian sums, the state stores three scalars per
data row (``alpha = phi'``, ``beta = phi''``, ``gamma = a^T w`` at the row's
anchor), the aggregates ``g`` and ``h``, and the explicit inverse ``B`` of

    lam I + sum_r weight_r beta_r a_r a_r^T,

which changes by one rank-one term per refreshed row and is patched with
Sherman-Morrison.  ``weight_r = 1/(n |R_i|)`` for the component ``i`` owning
row ``r`` (``1/n`` with one row per component).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import SingularMatrixError, ValidationError
from .problems import GlmProblem
from .sn import sample_subset

Array = np.ndarray

REFACTOR_EVERY = 1000
PROBE_EVERY = 100
RESIDUAL_LIMIT = 1e-6
SM_DENOM_MIN = 1e-12


def sherman_morrison(B: Array, u: Array, c: float) -> Array:
    """Inverse of ``H + c u u^T`` given ``B = H^{-1}``.

    Raises :class:`SingularMatrixError` when ``|1 + c u^T B u| < 1e-12``.
    """
    if c == 0.0:
        return B.copy()
    Bu = B @ u
    denom = 1.0 + c * float(u @ Bu)
    if abs(denom) < SM_DENOM_MIN:
        raise SingularMatrixError(f"Sherman-Morrison denominator {denom:.3e} too small")
    return B - (c / denom) * np.outer(Bu, Bu)


def _spd_inverse(H: Array) -> Array:
    try:
        factor = scipy.linalg.cho_factor(H)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("GLM curvature matrix is not positive definite") from None
    B = scipy.linalg.cho_solve(factor, np.eye(H.shape[0]))
    return 0.5 * (B + B.T)


@dataclass
class GlmFastState:
    alpha: Array
    beta: Array
    gamma: Array
    g: Array
    h: Array
    B: Array
    tau: int
    rng: np.random.Generator
    x: Optional[Array] = None
    k: int = 0
    drift_counter: int = 0
    probed_at: int = 0
    refactor_every: int = REFACTOR_EVERY
    probe_every: int = PROBE_EVERY
    evals: int = 0
    last_subset: Optional[Array] = None
    # d^2-cost kernels versus d^3-cost factorizations, for cost audits
    ops: dict = field(default_factory=lambda: {"matvec": 0, "rank1": 0, "factorize": 0, "probe": 0})


def curvature_matrix(problem: GlmProblem, beta: Array) -> Array:
    """``lam I + sum_r weight_r beta_r a_r a_r^T`` assembled densely."""
    A = problem.A
    H = (A.T * (problem.row_weight * beta)) @ A
    H[np.diag_indices_from(H)] += problem.lam
    return H


def _aggregates(problem: GlmProblem, alpha, beta, gamma):
    w = problem.row_weight
    return problem.A.T @ (w * alpha), problem.A.T @ (w * beta * gamma)


def glm_init(problem: GlmProblem, w0, seed: Optional[int] = None, tau: int = 1,
             refactor_every: int = REFACTOR_EVERY, probe_every: int = PROBE_EVERY) -> GlmFastState:
    """Fast-path state with every anchor at ``w0``."""
    if not isinstance(problem, GlmProblem):
        raise ValidationError("the fast path needs a GlmProblem")
    if int(tau) != tau or not 1 <= tau <= problem.n:
        raise ValidationError(f"tau must be an integer in [1, {problem.n}]")
    w0 = problem._check_x(w0)
    gamma = problem.A @ w0
    _, alpha, beta = problem._phi(gamma, problem.b)
    alpha = np.array(alpha, dtype=float)
    beta = np.array(beta, dtype=float)
    g, h = _aggregates(problem, alpha, beta, gamma)
    B = _spd_inverse(curvature_matrix(problem, beta))
    state = GlmFastState(alpha, beta, gamma, g, h, B, int(tau), np.random.default_rng(seed),
                         refactor_every=refactor_every, probe_every=probe_every)
    state.ops["factorize"] += 1
    return state


def refactorize(state: GlmFastState, problem: GlmProblem) -> GlmFastState:
    """Rebuild ``B``, ``g`` and ``h`` from the stored scalars (drift control)."""
    state.g, state.h = _aggregates(problem, state.alpha, state.beta, state.gamma)
    state.B = _spd_inverse(curvature_matrix(problem, state.beta))
    state.drift_counter = 0
    state.probed_at = 0
    state.ops["factorize"] += 1
    return state


def inverse_residual(state: GlmFastState, problem: GlmProblem) -> float:
    """``max |B H - I|`` against a freshly assembled ``H`` (O(d^3), for checks)."""
    H = curvature_matrix(problem, state.beta)
    return float(np.max(np.abs(state.B @ H - np.eye(problem.d))))


def _probe_residual(state: GlmFastState, problem: GlmProblem) -> float:
    # O(rows * d): H v without forming H
    v = np.ones(problem.d)
    Hv = problem.lam * v + problem.A.T @ (problem.row_weight * state.beta * (problem.A @ v))
    state.ops["probe"] += 1
    return float(np.max(np.abs(state.B @ Hv - v)))


def _refresh_row(state: GlmFastState, problem: GlmProblem, r: int, x: Array) -> bool:
    """Move row ``r``'s anchor to ``x``; returns False if ``B`` needs rebuilding."""
    a = problem.A[r]
    t = float(a @ x)
    _, da, db = problem._phi(t, problem.b[r])
    w = problem.row_weight[r]
    state.g += (w * (da - state.alpha[r])) * a
    state.h += (w * (db * t - state.beta[r] * state.gamma[r])) * a
    c = w * (db - state.beta[r])
    state.alpha[r], state.beta[r], state.gamma[r] = da, db, t
    if c == 0.0:
        return True
    Ba = state.B @ a
    denom = 1.0 + c * float(a @ Ba)
    state.ops["matvec"] += 1
    if abs(denom) < SM_DENOM_MIN:
        return False
    state.B -= (c / denom) * np.outer(Ba, Ba)
    state.ops["rank1"] += 1
    state.drift_counter += 1
    return True


def glm_step(state: GlmFastState, problem: GlmProblem) -> Array:
    """One fast SN iteration: ``x = B (h - g)``, then refresh a random subset."""
    x_next = state.B @ (state.h - state.g)
    state.ops["matvec"] += 1
    subset = sample_subset(state.rng, problem.n, state.tau)
    healthy = True
    for i in subset:
        for r in problem.blocks[i]:
            healthy &= _refresh_row(state, problem, int(r), x_next)
    state.evals += len(subset)
    state.last_subset = subset
    if not healthy or state.drift_counter >= state.refactor_every:
        refactorize(state, problem)
    elif state.probe_every and state.drift_counter - state.probed_at >= state.probe_every:
        state.probed_at = state.drift_counter
        if _probe_residual(state, problem) > RESIDUAL_LIMIT:
            refactorize(state, problem)
    state.x = x_next
    state.k += 1
    return x_next
