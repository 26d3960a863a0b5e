"""Experiment runner: configs, convergence traces, M tuning, comparisons, verification.

Configs are flat ``key = value`` text.  Keys before the first ``[run]``
header are shared; each ``[run]`` section describes one method for
:func:`compare`.  See :data:`KEYS` for the accepted keys.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import re
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import checks
from .baselines import (ReferenceSolution, cubic_newton_step, cyclic_sampler, newton_step,
                        solve_reference)
from .cubic import INNER_MAX_ITER, INNER_TOL, MODES
from .errors import SolverError, ValidationError
from .glm_fast import glm_init, glm_step
from .libsvm import load_libsvm, partition, synth_binary_dataset, synth_logistic, synth_quadratic
from .problems import FiniteSumProblem, GlmProblem, QuadraticProblem
from .scn import anchor_gaps, check_scn_theory, lyapunov_v_from_gaps, scn_init, scn_step
from .sn import check_distance_bound, expected_next_w, lyapunov_w, sn_init, sn_step, w_recursion_factor

METHODS = ("sn", "sn_glm", "scn", "newton", "cubic_newton", "inc_newton")
CUBIC_METHODS = ("scn", "cubic_newton")
SYNTH_KINDS = ("quadratic", "logistic", "binary")
SCHEMA_VERSION = 1
CSV_COLUMNS = ("method", "k", "epochs", "f_sub", "grad_norm", "W", "V", "dist", "wall_ms")
F_SUB_FLOOR = 1e-13

# keys that define the problem; runs in one comparison must agree on them
PROBLEM_KEYS = ("dataset", "dim", "loss", "lam", "parts", "shuffle", "shuffle_seed",
                "synth", "n", "d", "rows", "density", "mu", "L", "synth_seed")


@dataclass
class RunConfig:
    """Everything needed to reproduce one run.

    ``lam`` may be a number or a multiple of ``1/n`` written ``1/(100n)``,
    where ``n`` is the number of data rows.  ``x0`` is ``zeros``,
    ``const:C``, ``file:PATH`` or ``near:R`` (anchors at distance ``R`` from
    ``x*`` in seeded random directions).
    """

    dataset: Optional[str] = None
    dim: Optional[int] = None
    loss: str = "logistic"
    lam: str = "0"
    parts: Optional[int] = None
    shuffle: bool = False
    shuffle_seed: int = 0
    synth: Optional[str] = None
    n: int = 10
    d: int = 5
    rows: Optional[int] = None
    density: float = 0.1
    mu: float = 1.0
    L: float = 10.0
    synth_seed: int = 0
    method: str = "sn"
    label: Optional[str] = None
    tau: int = 1
    M: Optional[float] = None
    seed: int = 0
    max_iters: int = 100
    stop_tol: float = 1e-10
    x0: str = "zeros"
    inner_tol: float = INNER_TOL
    inner_max_iter: int = INNER_MAX_ITER
    norm: str = "l2"
    track_lyapunov: bool = False
    singular: str = "error"
    ref_tol: float = 1e-12
    ref_path: Optional[str] = None
    ref_M: float = 1.0

    def problem_key(self) -> tuple:
        return tuple(getattr(self, k) for k in PROBLEM_KEYS)

    def validate(self) -> "RunConfig":
        errs = []
        if self.method not in METHODS:
            errs.append(f"method must be one of {', '.join(METHODS)}")
        if (self.dataset is None) == (self.synth is None):
            errs.append("give exactly one of dataset= or synth=")
        if self.synth not in (None,) + SYNTH_KINDS:
            errs.append(f"synth must be one of {', '.join(SYNTH_KINDS)}")
        if self.method in CUBIC_METHODS and (self.M is None or not self.M > 0):
            errs.append(f"method {self.method} needs a positive M")
        if self.method not in CUBIC_METHODS and self.M is not None:
            errs.append(f"M is only used by {' and '.join(CUBIC_METHODS)}")
        if self.tau < 1:
            errs.append("tau must be at least 1")
        if self.method == "inc_newton" and self.tau != 1:
            errs.append("inc_newton uses tau = 1")
        if self.norm not in MODES:
            errs.append(f"norm must be one of {MODES}")
        if self.max_iters < 0:
            errs.append("max_iters must be nonnegative")
        if not self.stop_tol > 0:
            errs.append("tol must be positive")
        if self.singular not in ("error", "jitter"):
            errs.append("singular must be 'error' or 'jitter'")
        try:
            _x0_kind(self.x0)
        except ValidationError as exc:
            errs.append(str(exc))
        try:
            parse_lambda(self.lam, 1)
        except ValidationError as exc:
            errs.append(str(exc))
        if errs:
            raise ValidationError("invalid config: " + "; ".join(errs))
        return self


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
KEYS = tuple(_FIELDS)
_ALIASES = {"lambda": "lam", "tol": "stop_tol", "max-iters": "max_iters", "track-lyapunov": "track_lyapunov"}


def _coerce(name: str, raw):
    if raw is None or not isinstance(raw, str):
        return raw
    ftype = str(_FIELDS[name].type)
    text = raw.strip()
    if name == "lam":
        return text
    if text.lower() in ("none", ""):
        return None
    try:
        if "bool" in ftype:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if "int" in ftype:
            return int(text)
        if "float" in ftype:
            return float(text)
    except ValueError:
        raise ValidationError(f"bad value {raw!r} for {name}") from None
    return text


def _normalize_key(key: str) -> str:
    key = key.strip()
    key = _ALIASES.get(key, key).replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in _FIELDS:
        raise ValidationError(f"unknown config key {key!r}")
    return key


def make_config(values: dict) -> RunConfig:
    """RunConfig from a ``{key: value}`` mapping (strings are coerced)."""
    kwargs = {}
    for key, raw in values.items():
        name = _normalize_key(key)
        kwargs[name] = _coerce(name, raw)
    return RunConfig(**kwargs)


def parse_config_text(text: str) -> tuple[dict, list]:
    """Split config text into shared keys and a list of ``[run]`` sections."""
    shared: dict = {}
    sections: list = []
    current = shared
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            if line[1:-1].strip() != "run":
                raise ValidationError(f"unknown section {line} at line {lineno}")
            current = {}
            sections.append(current)
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValidationError(f"expected key = value at line {lineno}")
        current[_normalize_key(key)] = value.strip()
    return shared, sections


def load_configs(path: Optional[str] = None, overrides: Optional[dict] = None) -> list:
    """Configs from a file (one per ``[run]`` section, or one if none) plus overrides."""
    shared, sections = ({}, [])
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            shared, sections = parse_config_text(fh.read())
    overrides = {_normalize_key(k): v for k, v in (overrides or {}).items() if v is not None}
    sections = sections or [{}]
    return [make_config({**shared, **sec, **overrides}).validate() for sec in sections]


_LAMBDA_RE = re.compile(r"^1\s*/\s*\(?\s*([0-9.eE+-]*)\s*\*?\s*n\s*\)?$")


def parse_lambda(text, rows: int) -> float:
    """``0.01`` -> 0.01, ``1/(100n)`` -> ``1/(100 rows)``."""
    if not isinstance(text, str):
        return float(text)
    text = text.strip()
    m = _LAMBDA_RE.match(text)
    try:
        value = 1.0 / (float(m.group(1) or 1) * rows) if m else float(text)
    except ValueError:
        raise ValidationError(f"cannot parse lambda {text!r}") from None
    if not value >= 0 or not math.isfinite(value):
        raise ValidationError("lambda must be a finite nonnegative number")
    return value


def _x0_kind(spec: str) -> tuple[str, Optional[str]]:
    if spec == "zeros":
        return "zeros", None
    kind, sep, arg = spec.partition(":")
    if sep and kind in ("const", "file", "near"):
        if kind in ("const", "near"):
            try:
                float(arg)
            except ValueError:
                raise ValidationError(f"bad x0 value {spec!r}") from None
        return kind, arg
    raise ValidationError(f"x0 must be zeros, const:C, file:PATH or near:R (got {spec!r})")


def build_problem(cfg: RunConfig) -> FiniteSumProblem:
    if cfg.synth == "quadratic":
        return synth_quadratic(cfg.synth_seed, cfg.n, cfg.d, cfg.mu, cfg.L)
    if cfg.synth == "logistic":
        rows = cfg.rows or cfg.n
        return synth_logistic(cfg.synth_seed, cfg.n, cfg.d, parse_lambda(cfg.lam, rows), rows=rows)
    if cfg.synth == "binary":
        rows = cfg.rows or cfg.n
        data = synth_binary_dataset(cfg.synth_seed, rows, cfg.d, cfg.density)
        return partition(data, cfg.n, cfg.loss, parse_lambda(cfg.lam, rows))
    data = load_libsvm(cfg.dataset, d=cfg.dim)
    parts = cfg.parts or data.rows
    return partition(data, parts, cfg.loss, parse_lambda(cfg.lam, data.rows),
                     shuffle=cfg.shuffle, seed=cfg.shuffle_seed)


def initial_point(cfg: RunConfig, problem: FiniteSumProblem, x_star=None) -> np.ndarray:
    """``x0`` as a single vector, or per-anchor ``(n, d)`` array for ``near:R``."""
    kind, arg = _x0_kind(cfg.x0)
    if kind == "zeros":
        return np.zeros(problem.d)
    if kind == "const":
        return np.full(problem.d, float(arg))
    if kind == "file":
        x0 = np.loadtxt(arg, dtype=float).reshape(-1)
        if x0.shape != (problem.d,):
            raise ValidationError(f"x0 file has {x0.size} entries, expected {problem.d}")
        return x0
    if x_star is None:
        raise ValidationError("x0=near:R needs the reference optimum")
    dirs = np.random.default_rng(cfg.seed + 7919).standard_normal((problem.n, problem.d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return x_star + float(arg) * dirs


def reference_for(cfg: RunConfig, problem: FiniteSumProblem) -> ReferenceSolution:
    """Solve (or reuse from ``ref_path``) the high-accuracy optimum."""
    if cfg.ref_path and os.path.exists(cfg.ref_path):
        return load_reference(cfg.ref_path)
    if isinstance(problem, QuadraticProblem):
        x = problem.x_star
        ref = ReferenceSolution(x, problem.value(x), float(np.linalg.norm(problem.gradient(x))), 0, "closed_form")
    else:
        ref = solve_reference(problem, cfg.ref_tol, M_fallback=cfg.ref_M)
    if cfg.ref_path:
        save_reference(ref, cfg.ref_path)
    return ref


def save_reference(ref: ReferenceSolution, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"f_star": ref.f_star, "x_star": [float(v) for v in ref.x_star],
                   "grad_norm": ref.grad_norm, "iterations": ref.iterations, "method": ref.method},
                  fh, indent=1)


def load_reference(path: str) -> ReferenceSolution:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return ReferenceSolution(np.array(raw["x_star"], dtype=float), float(raw["f_star"]),
                             float(raw["grad_norm"]), int(raw["iterations"]), raw["method"])


@dataclass
class TraceRecord:
    k: int
    epochs: float
    f_sub: float
    grad_norm: float
    W: Optional[float]
    V: Optional[float]
    dist: float
    wall_ms: float


@dataclass
class RunResult:
    method: str
    trace: list
    summary: dict = field(default_factory=dict)


class _Driver:
    """Uniform stepping interface over the six methods."""

    def __init__(self, cfg: RunConfig, problem: FiniteSumProblem, x0: np.ndarray):
        self.cfg, self.problem = cfg, problem
        n = problem.n
        if not 1 <= cfg.tau <= n:
            raise ValidationError(f"tau must lie in [1, {n}]")
        m = cfg.method
        start = x0 if x0.ndim == 1 else x0.mean(axis=0)
        self.x = start.copy()
        self.anchors = np.tile(start, (n, 1)) if x0.ndim == 1 else x0.copy()
        self.per_step = {"newton": 1.0, "cubic_newton": 1.0, "inc_newton": 1.0 / n}.get(m, cfg.tau / n)
        self.state = None
        if m in ("sn", "inc_newton"):
            self.state = sn_init(problem, self.anchors, cfg.tau if m == "sn" else 1, cfg.seed, cfg.singular)
        elif m == "sn_glm":
            if not isinstance(problem, GlmProblem):
                raise ValidationError("sn_glm needs a GLM problem")
            if x0.ndim != 1:
                raise ValidationError("sn_glm starts from a single x0")
            self.state = glm_init(problem, start, cfg.seed, cfg.tau)
        elif m == "scn":
            self.state = scn_init(problem, self.anchors, cfg.tau, cfg.M, cfg.seed, cfg.norm,
                                  cfg.inner_tol, cfg.inner_max_iter)
        self.evals_done = 0

    @property
    def evals(self) -> int:
        if self.state is not None:
            return self.state.evals
        return self.evals_done

    def step(self) -> np.ndarray:
        m, p = self.cfg.method, self.problem
        if m == "sn":
            x = sn_step(self.state, p)
        elif m == "inc_newton":
            x = sn_step(self.state, p, sampler=cyclic_sampler)
        elif m == "scn":
            x = scn_step(self.state, p)
        elif m == "sn_glm":
            x = glm_step(self.state, p)
        elif m == "newton":
            x = newton_step(p, self.x, self.cfg.singular)
            self.evals_done += p.n
        else:
            x = cubic_newton_step(p, self.x, self.cfg.M, tol=1e-12)
            self.evals_done += p.n
        if self.state is not None and getattr(self.state, "anchors", None) is not None:
            self.anchors = self.state.anchors
        elif m == "sn_glm":
            self.anchors[self.state.last_subset] = x
        else:
            self.anchors[:] = x
        self.x = x
        return x


def run(cfg: RunConfig, problem: Optional[FiniteSumProblem] = None,
        reference: Optional[ReferenceSolution] = None) -> RunResult:
    """Execute one configured method and record a trace row per iteration."""
    cfg.validate()
    problem = problem or build_problem(cfg)
    reference = reference or reference_for(cfg, problem)
    x_star, f_star = reference.x_star, reference.f_star
    x0 = initial_point(cfg, problem, x_star)
    driver = _Driver(cfg, problem, x0)
    trace = []
    t0 = time.perf_counter()
    stopped = "max_iters"

    def record(k):
        ev = problem.full(driver.x, want_hessian=False)
        f_sub = max(ev.value - f_star, F_SUB_FLOOR)
        W = V = None
        if cfg.track_lyapunov:
            W = lyapunov_w(driver.anchors, x_star)
            V = lyapunov_v_from_gaps(anchor_gaps(driver.anchors, problem, f_star))
        trace.append(TraceRecord(k, k * driver.per_step, f_sub, float(np.linalg.norm(ev.gradient)),
                                 W, V, float(np.linalg.norm(driver.x - x_star)),
                                 (time.perf_counter() - t0) * 1e3))
        return f_sub

    f_sub = record(0)
    for k in range(1, cfg.max_iters + 1):
        if f_sub <= cfg.stop_tol:
            stopped = "tol"
            break
        try:
            x = driver.step()
            if not np.all(np.isfinite(x)):
                raise SolverError("iterate became non-finite")
        except SolverError as exc:
            raise type(exc)(f"{cfg.method} failed at iteration {k}: {exc}") from exc
        f_sub = record(k)
        if not math.isfinite(f_sub):
            raise SolverError(f"{cfg.method}: objective became non-finite at iteration {k}")
    else:
        if f_sub <= cfg.stop_tol:
            stopped = "tol"
    last = trace[-1]
    summary = {
        "method": cfg.method, "iterations": last.k, "epochs": last.epochs, "evals": driver.evals,
        "f_sub": last.f_sub, "grad_norm": last.grad_norm, "dist": last.dist, "stopped": stopped,
        "f_star": f_star, "ref_grad_norm": reference.grad_norm, "n": problem.n, "d": problem.d,
        "config": dataclasses.asdict(cfg),
    }
    return RunResult(cfg.label or cfg.method, trace, summary)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(results, fh, include_timing: bool = True) -> None:
    """Write traces as CSV: a ``# schema=1`` line, header, one row per record."""
    if isinstance(results, RunResult):
        results = [results]
    cols = [c for c in CSV_COLUMNS if include_timing or c != "wall_ms"]
    fh.write(f"# schema={SCHEMA_VERSION}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(cols)
    for res in results:
        for rec in res.trace:
            row = {"method": res.method, **dataclasses.asdict(rec)}
            writer.writerow([row[c] if c == "method" else _fmt(row[c]) for c in cols])


def csv_text(results, include_timing: bool = True) -> str:
    buf = io.StringIO()
    write_csv(results, buf, include_timing)
    return buf.getvalue()


def compare(configs: list) -> list:
    """Run several methods on one problem with a shared reference optimum.

    Duplicate labels get ``#2``, ``#3``, ... suffixes.
    """
    if len(configs) < 2:
        raise ValidationError("compare needs at least two configs")
    keys = {c.problem_key() for c in configs}
    if len(keys) != 1:
        raise ValidationError("problem specs differ")
    problem = build_problem(configs[0])
    reference = reference_for(configs[0], problem)
    seen: dict = {}
    results = []
    for cfg in configs:
        res = run(cfg, problem, reference)
        base = res.method
        seen[base] = seen.get(base, 0) + 1
        if seen[base] > 1:
            res.method = f"{base}#{seen[base]}"
        results.append(res)
    return results


@dataclass
class TuneRow:
    M: float
    converged: bool
    epochs: Optional[float]
    f_sub: float
    note: str = ""


def tune_M(cfg: RunConfig, grid, problem: Optional[FiniteSumProblem] = None,
           reference: Optional[ReferenceSolution] = None) -> tuple[float, list]:
    """Run the cubic method for every ``M`` in ``grid``; pick the fastest convergent one.

    A run converges when ``f - f*`` reaches ``cfg.stop_tol`` within
    ``cfg.max_iters`` iterations.  Ties in epochs go to the smaller ``M``.
    """
    grid = [float(M) for M in grid]
    if not grid:
        raise ValidationError("M grid is empty")
    if any(not M > 0 for M in grid):
        raise ValidationError("M grid values must be positive")
    if cfg.method not in CUBIC_METHODS:
        raise ValidationError("tune_M runs scn or cubic_newton")
    problem = problem or build_problem(cfg)
    reference = reference or reference_for(cfg, problem)
    table = []
    for M in grid:
        c = dataclasses.replace(cfg, M=M)
        try:
            res = run(c, problem, reference)
        except SolverError as exc:
            table.append(TuneRow(M, False, None, float("nan"), f"solver error: {exc}"))
            continue
        s = res.summary
        ok = s["stopped"] == "tol"
        table.append(TuneRow(M, ok, s["epochs"] if ok else None, s["f_sub"],
                             "" if ok else f"f-f*={s['f_sub']:.3e} after {s['iterations']} iterations"))
    good = [r for r in table if r.converged]
    if not good:
        diag = "; ".join(f"M={r.M:g}: {r.note}" for r in table)
        raise SolverError(f"no M in the grid converged ({diag})")
    best = min(good, key=lambda r: (r.epochs, r.M))
    return best.M, table


def smallest_convergent_M(table) -> Optional[float]:
    good = [r.M for r in table if r.converged]
    return min(good) if good else None


@dataclass
class VerifyReport:
    method: str
    checks: list
    notices: list

    @property
    def ok(self) -> bool:
        return all(c.status != checks.FAIL for c in self.checks)

    def lines(self) -> list:
        out = [f"# notice: {n}" for n in self.notices]
        out += [c.line() for c in self.checks]
        counts = {s: sum(c.status == s for c in self.checks) for s in (checks.PASS, checks.FAIL, checks.SKIP)}
        out.append(f"# summary: {counts['PASS']} PASS, {counts['FAIL']} FAIL, {counts['SKIP']} SKIP")
        return out


def certified_constants(problem: FiniteSumProblem) -> tuple[Optional[float], Optional[float]]:
    """Certified ``(mu, H)`` when the problem family provides them, else ``(None, None)``."""
    if isinstance(problem, GlmProblem):
        mu, H = problem.certified_constants()
    else:
        mu, H = problem.mu, problem.hess_lip
        if isinstance(problem, QuadraticProblem):
            H = 0.0
        elif H == 0.0:
            return None, None
    if not mu > 0:
        return None, None
    return mu, H


def verify_sn_step(state, problem, x_star, mu, H, basin_ok: bool) -> list:
    """Checks for the pending SN step: exact step identity and, with constants, the bounds."""
    k, n, tau = state.k, state.n, state.tau
    exact, enumerated = expected_next_w(state, problem, x_star)
    out = []
    if enumerated is None:
        out.append(checks.skipped("w_step_identity", k, "too many subsets to enumerate"))
        enumerated = exact
    else:
        out.append(checks.identity("w_step_identity", k, enumerated, exact))
    if mu is None:
        out += [checks.skipped(nm, k, "constants not certified")
                for nm in ("next_dist_vs_w", "w_recursion", "w_basin_level", "w_basin_contraction")]
        return out
    W = lyapunov_w(state, x_star)
    lhs, rhs, _ = check_distance_bound(state, problem, x_star, H, mu)
    out.append(checks.bound("next_dist_vs_w", k, lhs, rhs))
    out.append(checks.bound("w_recursion", k, enumerated, w_recursion_factor(W, tau, n, H, mu) * W))
    if basin_ok:
        factor = 1 - 3 * tau / (4 * n)
        level = math.inf if H == 0 else (mu / H) ** 2
        out.append(checks.bound("w_basin_level", k, W, level))
        c = checks.bound("w_basin_contraction", k, enumerated, factor * W)
        out.append(dataclasses.replace(c, note=f"factor={factor:g}"))
    else:
        out += [checks.skipped(nm, k, "initial anchors outside basin") for nm in ("w_basin_level", "w_basin_contraction")]
    return out


def verify(cfg: RunConfig, steps: int = 30, mu_cert: Optional[float] = None,
           H_cert: Optional[float] = None, problem: Optional[FiniteSumProblem] = None,
           reference: Optional[ReferenceSolution] = None) -> VerifyReport:
    """Run ``steps`` iterations of SN or SCN checking the Lyapunov relations each step.

    Without certified constants only the exact identities are checked and a
    downgrade notice is attached; bounds whose premise (basin, ``M >= H``)
    fails are reported as SKIP, never PASS.
    """
    cfg.validate()
    if cfg.method not in ("sn", "scn"):
        raise ValidationError("verify supports method sn or scn")
    problem = problem or build_problem(cfg)
    if math.comb(problem.n, cfg.tau) > 100_000:
        raise ValidationError("verify needs C(n, tau) <= 1e5")
    reference = reference or reference_for(cfg, problem)
    x_star, f_star = reference.x_star, reference.f_star
    notices = []
    if mu_cert is None or H_cert is None:
        auto_mu, auto_H = certified_constants(problem)
        mu_cert = auto_mu if mu_cert is None else mu_cert
        H_cert = auto_H if H_cert is None else H_cert
    if mu_cert is None or H_cert is None:
        mu_cert = H_cert = None
        notices.append("constants not certified: identities-only mode")
    x0 = initial_point(cfg, problem, x_star)
    anchors = np.tile(x0, (problem.n, 1)) if x0.ndim == 1 else x0
    out = []
    if cfg.method == "sn":
        state = sn_init(problem, anchors, cfg.tau, cfg.seed, cfg.singular)
        basin_ok = False
        if mu_cert is not None:
            radius = math.inf if H_cert == 0 else mu_cert / H_cert
            basin_ok = bool(np.all(np.linalg.norm(anchors - x_star, axis=1) <= radius))
            if not basin_ok:
                notices.append(f"initial anchors outside the basin ||w - x*|| <= {radius:.4g}")
        for _ in range(steps):
            out += verify_sn_step(state, problem, x_star, mu_cert, H_cert, basin_ok)
            sn_step(state, problem)
    else:
        state = scn_init(problem, anchors, cfg.tau, cfg.M, cfg.seed, cfg.norm, cfg.inner_tol, cfg.inner_max_iter)
        if cfg.norm != "l2" and mu_cert is not None:
            notices.append("l3 cube penalty: bounds are stated for the Euclidean norm, identities only")
            mu_cert = H_cert = None
        if mu_cert is not None and cfg.M < H_cert:
            notices.append(f"M={cfg.M:g} below certified H={H_cert:g}: bounds skipped")
        for _ in range(steps):
            out += check_scn_theory(state, problem, f_star, mu_cert, H_cert, x_star).checks
            scn_step(state, problem)
    return VerifyReport(cfg.method, out, notices)
