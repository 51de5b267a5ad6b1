"""Objectives and solvers: exact Newton, sketched Newton with bias
correction, first-order baselines, and a sparse random-projection baseline.

The regularized objectives expose their Hessian through a square-root
factor A(beta) with hessian = A(beta)^T A(beta) + lambda I, which is what
the row-sampling machinery consumes.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from . import rng as rsrng
from .debias import DebiasMode, DebiasSpec
from .hadamard import rotated_leverage_scores, srht_apply, srht_draw
from .linalg import gram, solve_spd
from .sampling import (PlanKind, SamplingPlan, apply_sketch,
                       approximation_factors, build_plan, draw,
                       exact_leverage_scores, full_draw)
from .debias import apply_debias
from .data import require_binary_labels

ARMIJO_C1 = 1e-4
ARMIJO_RATIO = 0.5
ARMIJO_MAX_HALVINGS = 40


class ProblemKind(enum.Enum):
    LOGISTIC = "logistic"
    LEAST_SQUARES = "least_squares"


@dataclass(frozen=True)
class GlmProblem:
    A: np.ndarray
    y: np.ndarray
    lam: float
    kind: ProblemKind

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        y = np.asarray(self.y, dtype=np.float64)
        if self.kind is ProblemKind.LOGISTIC:
            y = require_binary_labels(y)
        object.__setattr__(self, "A", np.asarray(self.A, dtype=np.float64))
        object.__setattr__(self, "y", y)

    @property
    def dim(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class Objective:
    value: float
    gradient: np.ndarray
    hessian_sqrt: np.ndarray  # n x d factor of the data term of the Hessian


def objective_eval(p: GlmProblem, beta: np.ndarray) -> Objective:
    """Value, gradient, and Hessian square-root factor at beta.

    The loss is the mean over samples plus (lambda/2) ||beta||^2, so the
    Hessian is gram(hessian_sqrt) + lambda I.  Overflow-safe at extreme
    margins.
    """
    A, y, lam = p.A, p.y, p.lam
    n = A.shape[0]
    beta = np.asarray(beta, dtype=np.float64)
    if p.kind is ProblemKind.LOGISTIC:
        z = y * (A @ beta)
        value = float(np.mean(np.logaddexp(0.0, -z))
                      + 0.5 * lam * beta @ beta)
        sig_neg = 1.0 / (1.0 + np.exp(np.minimum(z, 50.0)))
        sig_neg = np.where(z > 50.0, np.exp(-z), sig_neg)
        gradient = -(A.T @ (y * sig_neg)) / n + lam * beta
        w = sig_neg * (1.0 - sig_neg)
        hessian_sqrt = A * np.sqrt(w / n)[:, None]
        return Objective(value, gradient, hessian_sqrt)
    r = A @ beta - y
    value = float(0.5 * (r @ r) / n + 0.5 * lam * beta @ beta)
    gradient = (A.T @ r) / n + lam * beta
    return Objective(value, gradient, A / np.sqrt(n))


def _armijo(p: GlmProblem, beta, value, gradient, direction) -> float:
    """Backtracking step size satisfying the sufficient-decrease condition."""
    slope = float(gradient @ direction)
    mu = 1.0
    for _ in range(ARMIJO_MAX_HALVINGS):
        cand = objective_eval(p, beta - mu * direction).value
        if cand <= value - ARMIJO_C1 * mu * slope:
            return mu
        mu *= ARMIJO_RATIO
    return mu


@dataclass(frozen=True)
class IterationRecord:
    t: int
    rel_error_H: float
    grad_norm: float
    step_size: float
    wall_ns: int


@dataclass
class RunTrace:
    records: list[IterationRecord] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    beta: np.ndarray | None = None
    reference_grad_norm: float | None = None


class _ErrorMeter:
    """Relative squared error in the Hessian norm at the reference point."""

    def __init__(self, p: GlmProblem, reference: np.ndarray | None,
                 beta0: np.ndarray):
        self.reference = None
        if reference is not None:
            self.reference = np.asarray(reference, dtype=np.float64)
            obj = objective_eval(p, self.reference)
            self.H = gram(obj.hessian_sqrt) + p.lam * np.eye(p.dim)
            delta0 = beta0 - self.reference
            self.base = float(delta0 @ self.H @ delta0)

    def __call__(self, beta: np.ndarray) -> float:
        if self.reference is None:
            return float("nan")
        delta = beta - self.reference
        err = float(delta @ self.H @ delta)
        return err / self.base if self.base > 0 else 0.0


def newton_exact(p: GlmProblem, beta0, iters: int, line_search: bool = True,
                 reference: np.ndarray | None = None,
                 grad_tol: float = 0.0) -> RunTrace:
    """Exact damped Newton iteration; stops early at grad_tol when set."""
    beta = np.asarray(beta0, dtype=np.float64).copy()
    meter = _ErrorMeter(p, reference, beta)
    trace = RunTrace(config={"method": "newton_exact",
                             "line_search": line_search})
    eye = np.eye(p.dim)
    for t in range(iters + 1):
        t_start = time.perf_counter_ns()
        obj = objective_eval(p, beta)
        grad_norm = float(np.linalg.norm(obj.gradient))
        if t == iters or (grad_tol > 0 and grad_norm < grad_tol):
            trace.records.append(IterationRecord(
                t, meter(beta), grad_norm, 0.0, 0))
            break
        H = gram(obj.hessian_sqrt) + p.lam * eye
        direction = solve_spd(H, obj.gradient)
        mu = (_armijo(p, beta, obj.value, obj.gradient, direction)
              if line_search else 1.0)
        trace.records.append(IterationRecord(
            t, meter(beta), grad_norm, mu,
            time.perf_counter_ns() - t_start))
        beta = beta - mu * direction
    trace.beta = beta
    return trace


def reference_solution(p: GlmProblem,
                       grad_tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Run exact Newton to near-stationarity; returns (beta*, grad norm)."""
    trace = newton_exact(p, np.zeros(p.dim), iters=200, line_search=True,
                         grad_tol=grad_tol)
    grad = objective_eval(p, trace.beta).gradient
    return trace.beta, float(np.linalg.norm(grad))


class StepRule(enum.Enum):
    ANALYTIC = "analytic"
    ARMIJO = "armijo"
    FIXED = "fixed"


@dataclass(frozen=True)
class SsnConfig:
    plan_kind: PlanKind | str       # a PlanKind, or "srht"
    m: int
    debias: DebiasMode = DebiasMode.SCALAR
    step_rule: StepRule = StepRule.ANALYTIC
    fixed_step: float = 1.0
    mix: float = 0.5                # shrinkage plans
    m1: int | None = None           # approximate-leverage sketch width
    m2: int | None = None
    full_coverage: bool = False     # test path: sketch = the full matrix


def _ssn_direction(p: GlmProblem, obj: Objective, config: SsnConfig,
                   seed: int):
    """Sketched Newton direction plus the quantities the step rule needs."""
    hs = obj.hessian_sqrt
    n = hs.shape[0]
    C = p.lam * np.eye(p.dim)

    if config.full_coverage:
        At = apply_sketch(full_draw(n), hs)
        d_eff = float(exact_leverage_scores(hs, C).sum())
        rho_max = 1.0
    elif config.plan_kind == "srht":
        sd = srht_draw(n, config.m, rsrng.split(seed, 0))
        scores = exact_leverage_scores(hs, C)
        d_eff = float(scores.sum())
        if config.debias is DebiasMode.SCALAR:
            sample = apply_debias(sd.sample, DebiasSpec.scalar(config.m, d_eff))
            sd = type(sd)(signs=sd.signs, sample=sample,
                          n_original=sd.n_original, n_padded=sd.n_padded)
        elif config.debias is not DebiasMode.NONE:
            raise ValueError("the Hadamard sketch only supports scalar "
                             "debiasing")
        At = srht_apply(sd, hs)
        rot = rotated_leverage_scores(hs, C, sd.signs)
        rho_max = float(rot.max() * sd.n_padded / d_eff)
    else:
        plan = build_plan(config.plan_kind, hs, C, mix=config.mix,
                          m1=config.m1, m2=config.m2,
                          seed=rsrng.split(seed, 1))
        exact = (plan.scores if plan.kind is PlanKind.EXACT_LEVERAGE
                 else exact_leverage_scores(hs, C))
        d_eff = float(exact.sum())
        if config.debias is DebiasMode.NONE:
            spec = DebiasSpec.none()
        elif config.debias is DebiasMode.SCALAR:
            spec = DebiasSpec.scalar(config.m, d_eff)
        elif config.debias is DebiasMode.FINE_GRAINED_EXACT:
            spec = DebiasSpec.fine_grained(plan, exact, config.m)
        else:
            spec = DebiasSpec.fine_grained_approx(plan, plan.scores, config.m)
        sk = apply_debias(draw(plan, config.m, rsrng.split(seed, 2)), spec)
        At = apply_sketch(sk, hs)
        rho_max = approximation_factors(plan, exact).rho_max

    direction = solve_spd(gram(At) + C, obj.gradient)
    return direction, d_eff, rho_max


def analytic_step_size(m: int, d_eff: float, rho_max: float) -> float:
    return 1.0 - rho_max / (m / d_eff + rho_max)


def ssn_step(p: GlmProblem, beta, config: SsnConfig,
             seed: int) -> tuple[np.ndarray, dict]:
    """One sketched Newton step with a fresh sketch of the current Hessian."""
    beta = np.asarray(beta, dtype=np.float64)
    obj = objective_eval(p, beta)
    direction, d_eff, rho_max = _ssn_direction(p, obj, config, seed)
    if config.step_rule is StepRule.ANALYTIC:
        m_eff = p.A.shape[0] if config.full_coverage else config.m
        mu = analytic_step_size(m_eff, d_eff, rho_max)
    elif config.step_rule is StepRule.ARMIJO:
        mu = _armijo(p, beta, obj.value, obj.gradient, direction)
    else:
        mu = config.fixed_step
    diagnostics = {"step_size": mu, "d_eff": d_eff, "rho_max": rho_max,
                   "grad_norm": float(np.linalg.norm(obj.gradient))}
    return beta - mu * direction, diagnostics


def sparse_rademacher_sketch(A: np.ndarray, m: int, nnz_per_row: int,
                             seed: int) -> np.ndarray:
    """m-row sparse sign sketch; E[sketch^T sketch] = A^T A.

    Each sketch row combines ``nnz_per_row`` distinct uniformly chosen rows
    of A with independent signs, scaled by sqrt(n / (m * nnz)).
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if not 1 <= nnz_per_row <= n:
        raise ValueError("nnz_per_row must lie in [1, rows(A)]")
    gen = rsrng.generator(seed)
    cols = np.argsort(gen.random((m, n)), axis=1)[:, :nnz_per_row]
    signs = gen.integers(0, 2, size=(m, nnz_per_row)) * 2.0 - 1.0
    scale = np.sqrt(n / (m * nnz_per_row))
    out = np.einsum("mk,mkd->md", signs, A[cols]) * scale
    return out


@dataclass(frozen=True)
class GdMethod:
    lr: float


@dataclass(frozen=True)
class SgdMethod:
    lr: float
    batch: int


@dataclass(frozen=True)
class NewtonExactMethod:
    line_search: bool = True


@dataclass(frozen=True)
class SsnMethod:
    config: SsnConfig


@dataclass(frozen=True)
class SparseProjMethod:
    m: int
    nnz_per_row: int = 4
    step_rule: StepRule = StepRule.ARMIJO
    fixed_step: float = 1.0


def run_solver(p: GlmProblem, method, beta0, iters: int,
               reference: np.ndarray | None = None,
               seed: int = 0) -> RunTrace:
    """Iterate a solver, recording per-iteration error, gradient and time."""
    if isinstance(method, NewtonExactMethod):
        trace = newton_exact(p, beta0, iters, method.line_search,
                             reference=reference)
        return trace

    beta = np.asarray(beta0, dtype=np.float64).copy()
    meter = _ErrorMeter(p, reference, beta)
    trace = RunTrace(config={"method": type(method).__name__})
    eye = np.eye(p.dim)
    perm = None
    cursor = 0
    epoch = 0

    for t in range(iters + 1):
        t_start = time.perf_counter_ns()
        obj = objective_eval(p, beta)
        grad_norm = float(np.linalg.norm(obj.gradient))
        if t == iters:
            trace.records.append(IterationRecord(
                t, meter(beta), grad_norm, 0.0, 0))
            break
        if isinstance(method, GdMethod):
            step = method.lr
            beta_next = beta - step * obj.gradient
        elif isinstance(method, SgdMethod):
            n = p.A.shape[0]
            if perm is None or cursor + method.batch > n:
                perm = rsrng.generator(seed, 3, epoch).permutation(n)
                cursor = 0
                epoch += 1
            idx = perm[cursor:cursor + method.batch]
            cursor += method.batch
            sub = GlmProblem(p.A[idx], p.y[idx], p.lam, p.kind)
            g = objective_eval(sub, beta).gradient
            step = method.lr
            beta_next = beta - step * g
        elif isinstance(method, SsnMethod):
            beta_next, diag = ssn_step(p, beta, method.config,
                                       rsrng.split(seed, 4, t))
            step = diag["step_size"]
        elif isinstance(method, SparseProjMethod):
            At = sparse_rademacher_sketch(obj.hessian_sqrt, method.m,
                                          method.nnz_per_row,
                                          rsrng.split(seed, 5, t))
            direction = solve_spd(gram(At) + p.lam * eye, obj.gradient)
            if method.step_rule is StepRule.ARMIJO:
                step = _armijo(p, beta, obj.value, obj.gradient, direction)
            else:
                step = method.fixed_step
            beta_next = beta - step * direction
        else:
            raise ValueError(f"unknown method {method!r}")
        trace.records.append(IterationRecord(
            t, meter(beta), grad_norm, step,
            time.perf_counter_ns() - t_start))
        beta = beta_next
    trace.beta = beta
    return trace
