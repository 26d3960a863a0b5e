"""Stochastic Cubic Newton (SCN).

Each anchor ``w_i`` contributes the second-order Taylor model of ``f_i`` at
``w_i`` plus ``(M/6)||x - w_i||^3``.  The quadratic parts are kept as three
running sums (Hessians, linear terms, constants) so that the averaged model
is a :class:`~stochnewton.cubic.CubicModel` built in O(d^2).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import checks
from .cubic import INNER_MAX_ITER, INNER_TOL, MODES, CubicModel, l3_sums, solve_multi_anchor
from .errors import NonConvergenceError, SolverError, ValidationError
from .problems import FiniteSumProblem
from .sn import _broadcast_anchors, _check_tau, sample_subset

Array = np.ndarray


def _taylor_terms(problem: FiniteSumProblem, i: int, w: Array):
    v, g, h = problem.component(i, w)
    hw = h @ w
    return h, g - hw, v - float(g @ w) + 0.5 * float(w @ hw)


@dataclass
class ScnState:
    anchors: Array
    agg_hess: Array
    agg_lin: Array
    agg_const: float
    M: float
    tau: int
    rng: np.random.Generator
    mode: str = "l2"
    inner_tol: float = INNER_TOL
    inner_max_iter: int = INNER_MAX_ITER
    inner_method: str = "newton"
    x: Optional[Array] = None
    k: int = 0
    evals: int = 0
    sum_w: Array = field(default=None, repr=False)
    sum_w2: Array = field(default=None, repr=False)
    sum_w3: float = 0.0
    last_subset: Optional[Array] = field(default=None, repr=False)
    _pending: Optional[tuple] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.anchors.shape[0]

    def model(self) -> CubicModel:
        """Averaged model ``(1/n) sum_i [phi_i(x) + (M/6) ||x - w_i||^3]``."""
        n = self.n
        return CubicModel(self.agg_lin / n, self.agg_hess / n, self.anchors.copy(), self.M,
                          self.agg_const / n, self.mode)

    def next_iterate(self) -> Array:
        """Minimizer of the current model; cached until the anchors move."""
        if self._pending is not None and self._pending[0] == self.k:
            return self._pending[1].copy()
        try:
            x = solve_multi_anchor(self.model(), tol=self.inner_tol, max_iter=self.inner_max_iter,
                                   method=self.inner_method)
        except NonConvergenceError as exc:
            raise NonConvergenceError(f"inner solver failed at k={self.k}: {exc}",
                                      residual=exc.residual, best=exc.best) from None
        self._pending = (self.k, x)
        return x.copy()


def _assemble(problem: FiniteSumProblem, anchors: Array):
    H = np.zeros((problem.d, problem.d))
    lin = np.zeros(problem.d)
    const = 0.0
    for i in range(problem.n):
        h, l, c = _taylor_terms(problem, i, anchors[i])
        H += h
        lin += l
        const += c
    return H, lin, const


def _refresh_sums(state: ScnState) -> None:
    state.sum_w, state.sum_w2, state.sum_w3, _ = l3_sums(state.anchors)


def scn_init(problem: FiniteSumProblem, anchors0, tau: int = 1, M: float = 1.0,
             seed: Optional[int] = None, mode: str = "l2", inner_tol: float = INNER_TOL,
             inner_max_iter: int = INNER_MAX_ITER, inner_method: str = "newton") -> ScnState:
    """SCN state with model sums assembled in one pass over the components."""
    if not M > 0:
        raise ValidationError("M must be positive")
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}")
    tau = _check_tau(problem, tau)
    anchors = _broadcast_anchors(problem, anchors0)
    H, lin, const = _assemble(problem, anchors)
    state = ScnState(anchors, H, lin, const, float(M), tau, np.random.default_rng(seed), mode,
                     inner_tol, inner_max_iter, inner_method)
    _refresh_sums(state)
    return state


def scn_step(state: ScnState, problem: FiniteSumProblem, sampler=None) -> Array:
    """One SCN iteration; returns ``x^{k+1}``."""
    x_next = state.next_iterate()
    subset = sample_subset(state.rng, state.n, state.tau) if sampler is None else np.asarray(sampler(state))
    if len(subset) == state.n:
        state.anchors[:] = x_next
        state.agg_hess, state.agg_lin, state.agg_const = _assemble(problem, state.anchors)
    else:
        for i in subset:
            h_old, l_old, c_old = _taylor_terms(problem, i, state.anchors[i])
            h_new, l_new, c_new = _taylor_terms(problem, i, x_next)
            state.agg_hess += h_new - h_old
            state.agg_lin += l_new - l_old
            state.agg_const += c_new - c_old
            state.anchors[i] = x_next
    _refresh_sums(state)
    state.evals += len(subset)
    state.last_subset = subset
    state.x = x_next
    state.k += 1
    return x_next


def model_value_recomputed(state: ScnState, problem: FiniteSumProblem, x) -> float:
    """The averaged model at ``x`` rebuilt anchor by anchor (drift oracle)."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for i, w in enumerate(state.anchors):
        v, g, h = problem.component(i, w)
        u = x - w
        total += v + float(g @ u) + 0.5 * float(u @ h @ u)
        total += state.M / 6.0 * (np.linalg.norm(u) ** 3 if state.mode == "l2" else np.sum(np.abs(u) ** 3))
    return total / state.n


def lyapunov_v_from_gaps(gaps) -> float:
    """Mean of ``gap^{3/2}`` over nonnegative suboptimality gaps."""
    return float(np.mean(np.asarray(gaps, dtype=float) ** 1.5))


def anchor_gaps(anchors, problem: FiniteSumProblem, f_star: float) -> Array:
    """``f(w_i) - f*`` per anchor, with rounding-level negatives clamped to 0."""
    anchors = getattr(anchors, "anchors", anchors)
    gaps = np.array([problem.value(w) for w in anchors]) - f_star
    if np.any(gaps < -1e-6):
        raise SolverError(f"anchor value below f* by {-gaps.min():.3e}; the reference optimum is wrong")
    return np.maximum(gaps, 0.0)


def lyapunov_v(state, problem: FiniteSumProblem, f_star: float) -> float:
    """``(1/n) sum_i (f(w_i) - f*)^{3/2}``; costs ``n`` full-function evaluations."""
    return lyapunov_v_from_gaps(anchor_gaps(state, problem, f_star))


def scn_constant(M: float, H: float, mu: float) -> float:
    """``sqrt(2) (M + H) / (3 mu^{3/2})``, the factor linking f(x+) - f* to V."""
    return math.sqrt(2.0) * (M + H) / (3.0 * mu ** 1.5)


@dataclass
class ScnReport:
    k: int
    V: float
    expected_next_V: float
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.status != checks.FAIL for c in self.checks)


def check_scn_theory(state: ScnState, problem: FiniteSumProblem, f_star: float,
                     mu_cert: Optional[float] = None, H_cert: Optional[float] = None,
                     x_star: Optional[Array] = None, max_subsets: int = 100_000) -> ScnReport:
    """Check the SCN Lyapunov relations for the pending step.

    Always checks the exact one-step identity for ``E[V^{k+1}]`` by subset
    enumeration.  With certified ``mu_cert`` (strong convexity of f) and
    ``H_cert`` (Hessian Lipschitz constant of every f_i) and ``M >= H_cert``
    it also checks the model upper bound, the value bound at ``x*`` (needs
    ``x_star``), the bound on ``f(x+) - f*`` in terms of V, the recursion for
    ``E[V^{k+1}]``, and, when every anchor lies in the basin
    ``f(w_i) - f* <= 2 mu^3/(M+H)^2``, contraction by ``1 - tau/(2n)``.
    """
    n, tau, k, M = state.n, state.tau, state.k, state.M
    if math.comb(n, tau) > max_subsets:
        raise ValidationError(f"C({n},{tau}) subsets exceed the enumeration budget")
    x_next = state.next_iterate()
    gaps = anchor_gaps(state, problem, f_star)
    V = lyapunov_v_from_gaps(gaps)
    f_next = problem.value(x_next)
    gap_next = max(f_next - f_star, 0.0)
    total = 0.0
    count = 0
    for subset in itertools.combinations(range(n), tau):
        moved = gaps.copy()
        moved[list(subset)] = gap_next
        total += lyapunov_v_from_gaps(moved)
        count += 1
    expected = total / count
    out = [checks.identity("v_step_identity", k, expected,
                           (1 - tau / n) * V + tau / n * gap_next ** 1.5)]
    names = ("model_upper_bound", "value_bound_at_xstar", "next_gap_vs_v",
             "v_recursion", "v_basin_level", "v_basin_contraction")
    if mu_cert is None or H_cert is None or not mu_cert > 0:
        out += [checks.skipped(nm, k, "constants not certified") for nm in names]
        return ScnReport(k, V, expected, out)
    if M < H_cert:
        out += [checks.skipped(nm, k, f"M={M:g} < H_cert={H_cert:g}") for nm in names]
        return ScnReport(k, V, expected, out)
    mu, H = mu_cert, H_cert
    C = scn_constant(M, H, mu)
    model = state.model()
    out.append(checks.bound("model_upper_bound", k, f_next, model.objective(x_next)))
    if x_star is not None:
        cubes = np.linalg.norm(state.anchors - x_star, axis=1) ** 3
        out.append(checks.bound("value_bound_at_xstar", k, f_next,
                                f_star + (M + H) / (6.0 * n) * float(cubes.sum())))
    else:
        out.append(checks.skipped("value_bound_at_xstar", k, "x_star not supplied"))
    out.append(checks.bound("next_gap_vs_v", k, gap_next, C * V))
    out.append(checks.bound("v_recursion", k, expected,
                            (1 - tau / n + tau / n * C ** 1.5 * math.sqrt(V)) * V))
    basin = 2.0 * mu ** 3 / (M + H) ** 2
    if np.all(gaps <= basin):
        out.append(checks.bound("v_basin_level", k, V, 27.0 * mu ** 4.5 / (8.0 * math.sqrt(2.0) * (M + H) ** 3)))
        out.append(checks.bound("v_basin_contraction", k, expected, (1 - tau / (2.0 * n)) * V))
    else:
        out.append(checks.skipped("v_basin_level", k, "anchors outside basin"))
        out.append(checks.skipped("v_basin_contraction", k, "anchors outside basin"))
    return ScnReport(k, V, expected, out)
