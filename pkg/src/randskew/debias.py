"""Inversion-bias correction for row-sampling sketches.

Three correction modes: the scalar factor m/(m - d_eff); per-row
fine-grained weights sqrt(m / (m - l_i / pi_i)) (with exact or approximate
leverage scores); and the self-consistent diagonal D that characterizes
what the uncorrected sketched inverse actually estimates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (NoConvergence, NotPositiveDefinite, SketchTooSmall,
                     ZeroProbabilityWithPositiveScore)
from .linalg import cholesky
from .sampling import (SamplingPlan, SketchDraw, PlanKind,
                       approximation_factors, exact_leverage_scores)
from scipy.linalg import solve_triangular

RANGE_SLACK = 1e-9  # numerical slack on the proven range of D


class DebiasMode(enum.Enum):
    NONE = "none"
    SCALAR = "scalar"
    FINE_GRAINED_EXACT = "fine_grained_exact"
    FINE_GRAINED_APPROX = "fine_grained_approx"


@dataclass(frozen=True)
class DebiasSpec:
    mode: DebiasMode
    factor: float | None = None            # scalar mode
    row_weights: np.ndarray | None = None  # fine-grained multipliers, length n
    omega_hint: float | None = None        # approx mode accuracy hint

    @staticmethod
    def none() -> "DebiasSpec":
        return DebiasSpec(DebiasMode.NONE)

    @staticmethod
    def scalar(m: int, d_eff: float) -> "DebiasSpec":
        return DebiasSpec(DebiasMode.SCALAR, factor=scalar_factor(m, d_eff))

    @staticmethod
    def fine_grained(plan: SamplingPlan, scores: np.ndarray,
                     m: int) -> "DebiasSpec":
        return DebiasSpec(DebiasMode.FINE_GRAINED_EXACT,
                          row_weights=fine_grained_weights(plan, scores, m))

    @staticmethod
    def fine_grained_approx(plan: SamplingPlan, approx_scores: np.ndarray,
                            m: int,
                            omega_hint: float | None = None) -> "DebiasSpec":
        w = approx_fine_grained_weights(plan, approx_scores, m)
        return DebiasSpec(DebiasMode.FINE_GRAINED_APPROX, row_weights=w,
                          omega_hint=omega_hint)


def scalar_factor(m: int, d_eff: float) -> float:
    """m / (m - d_eff); requires m > d_eff."""
    if not m > d_eff:
        raise SketchTooSmall(
            f"sketch size m={m} must exceed d_eff={d_eff:.6g}")
    return m / (m - d_eff)


def fine_grained_weights(plan: SamplingPlan, scores: np.ndarray,
                         m: int) -> np.ndarray:
    """Per-row multipliers sqrt(m / (m - l_i / pi_i)) on the sketch weights.

    For an exact-leverage plan l_i / pi_i is identically d_eff, so every
    multiplier equals the scalar-mode sqrt(m / (m - d_eff)) bitwise.
    Rows with zero score need no correction and get multiplier 1.
    """
    scores = np.asarray(scores, dtype=np.float64)
    ratios = np.zeros(plan.n)
    positive = scores > 0
    if np.any(positive & (plan.probs == 0)):
        i = int(np.argmax(positive & (plan.probs == 0)))
        raise ZeroProbabilityWithPositiveScore(
            f"row {i} has positive score but zero probability", index=i)
    if plan.kind is PlanKind.EXACT_LEVERAGE and plan.scores is not None \
            and scores.shape == plan.scores.shape \
            and np.array_equal(scores, plan.scores):
        ratios[positive] = plan.d_eff  # l_i / pi_i == d_eff analytically
    else:
        ratios[positive] = scores[positive] / plan.probs[positive]
    worst = ratios.max(initial=0.0)
    if not m > worst:
        i = int(np.argmax(ratios))
        raise SketchTooSmall(
            f"m={m} <= l_i/pi_i={worst:.6g} at row {i}", index=i)
    return np.sqrt(m / (m - ratios))


def approx_fine_grained_weights(plan: SamplingPlan, approx_scores: np.ndarray,
                                m: int) -> np.ndarray:
    """fine_grained_weights with approximate scores substituted for exact."""
    return fine_grained_weights(plan, approx_scores, m)


def apply_debias(sketch: SketchDraw, spec: DebiasSpec) -> SketchDraw:
    """Re-weight a realized sketch according to the debias spec."""
    if spec.mode is DebiasMode.NONE:
        return sketch
    if spec.mode is DebiasMode.SCALAR:
        scale = math.sqrt(spec.factor)
        return SketchDraw(m=sketch.m, indices=sketch.indices,
                          weights=sketch.weights * scale)
    return SketchDraw(m=sketch.m, indices=sketch.indices,
                      weights=sketch.weights
                      * spec.row_weights[sketch.indices])


@dataclass(frozen=True)
class FixedPointD:
    diag: np.ndarray
    iterations: int
    residual: float


def solve_fixed_point_d(A: np.ndarray, C: np.ndarray, plan: SamplingPlan,
                        m: int, tol: float = 1e-10,
                        max_iters: int = 500) -> FixedPointD:
    """Solve D_ii = m pi_i / (m pi_i + a_i^T (A^T D A + C)^{-1} a_i).

    Plain fixed-point iteration from the midpoint initialization
    D = m/(m + d_eff).  The result is checked against the proven range
    [m/(m + 2 rho_max d_eff), m/(m + rho_min d_eff)].
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    probs = plan.probs
    exact = exact_leverage_scores(A, C)
    d_eff = float(exact.sum())
    factors = approximation_factors(plan, exact)

    zero_rows = ~np.any(A != 0.0, axis=1)
    if np.any((probs == 0) & ~zero_rows):
        i = int(np.argmax((probs == 0) & ~zero_rows))
        raise ZeroProbabilityWithPositiveScore(
            f"nonzero row {i} has zero probability", index=i)

    diag = np.full(n, m / (m + d_eff))
    diag[zero_rows] = 1.0
    residuals = []
    for it in range(1, max_iters + 1):
        scaled = A * np.sqrt(diag)[:, None]
        try:
            L = cholesky(scaled.T @ scaled + C)
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(
                "A^T D A + C lost positive definiteness during the "
                "fixed-point iteration") from exc
        X = solve_triangular(L, A.T, lower=True)
        quad = np.einsum("ij,ij->j", X, X)  # a_i^T (A^T D A + C)^{-1} a_i
        new = np.empty(n)
        active = ~zero_rows
        new[active] = (m * probs[active]
                       / (m * probs[active] + quad[active]))
        new[zero_rows] = 1.0
        residual = float(np.abs(new - diag).max())
        residuals.append(residual)
        diag = new
        if residual < tol:
            # the lower bound is proven only for m > 2 rho_max d_eff
            lo = (m / (m + 2.0 * factors.rho_max * d_eff) - RANGE_SLACK
                  if m > 2.0 * factors.rho_max * d_eff else 0.0)
            hi = m / (m + factors.rho_min * d_eff) + RANGE_SLACK
            active_diag = diag[active]
            if active_diag.size and (active_diag.min() < lo
                                     or active_diag.max() > hi):
                raise AssertionError(
                    f"fixed point left its proven range [{lo:.6g}, {hi:.6g}]:"
                    f" [{active_diag.min():.6g}, {active_diag.max():.6g}]")
            return FixedPointD(diag=diag, iterations=it, residual=residual)
    raise NoConvergence(
        f"fixed-point iteration did not reach tol={tol} in {max_iters} "
        f"sweeps (last residual {residuals[-1]:.3e})",
        iterations=max_iters, residual=residuals[-1])
