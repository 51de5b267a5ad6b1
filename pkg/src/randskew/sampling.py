"""Importance-sampling plans, row sketches, and approximation factors.

A :class:`SamplingPlan` holds the sampling probabilities (and the leverage
scores they were built from, when applicable); a :class:`SketchDraw` is one
realized with-replacement sketch, stored as row indices plus per-slot
scales so that the m-by-n sampling matrix is never materialized.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as rsrng
from .errors import (AllZeroRows, IndexOutOfRange, NotPositiveDefinite,
                     ZeroProbabilityWithPositiveScore)
from .linalg import cholesky, gram
from scipy.linalg import solve_triangular

SJLT_NNZ_PER_COLUMN = 4  # nonzeros per column of the sparse JL sketch


class PlanKind(enum.Enum):
    UNIFORM = "uniform"
    ROW_NORM = "row_norm"
    EXACT_LEVERAGE = "exact_leverage"
    APPROX_LEVERAGE = "approx_leverage"
    DOUBLE_SKETCH_APPROX_LEVERAGE = "double_sketch_approx_leverage"
    SHRINKAGE = "shrinkage"


@dataclass(frozen=True)
class SamplingPlan:
    kind: PlanKind
    probs: np.ndarray           # length n, nonnegative, sums to 1
    d_eff: float                # effective dimension of A given C
    scores: np.ndarray | None = None   # leverage scores used, if any
    mix: float | None = None           # shrinkage mixing weight

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "probs", p)
        if self.scores is not None:
            s = np.asarray(self.scores, dtype=np.float64)
            if abs(s.sum() - self.d_eff) > 1e-10 * max(abs(self.d_eff), 1.0):
                raise ValueError("d_eff inconsistent with stored scores")
            object.__setattr__(self, "scores", s)

    @property
    def n(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class ApproxFactors:
    rho_min: float
    rho_max: float
    argmax_index: int


@dataclass(frozen=True)
class SketchDraw:
    m: int
    indices: np.ndarray   # int array length m, values in [0, n)
    weights: np.ndarray   # positive row scales, length m

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.m,) or not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be m finite positive scalars")
        object.__setattr__(self, "indices",
                           np.asarray(self.indices, dtype=np.intp))
        object.__setattr__(self, "weights", w)


def exact_leverage_scores(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    """l_i = a_i^T (A^T A + C)^{-1} a_i for every row a_i of A."""
    A = np.asarray(A, dtype=np.float64)
    L = cholesky(gram(A) + C)
    X = solve_triangular(L, A.T, lower=True)
    return np.einsum("ij,ij->j", X, X)


def effective_dimension(scores: np.ndarray) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size and np.any(scores < 0):
        raise ValueError("leverage scores must be nonnegative")
    return float(scores.sum())


def _sjlt_apply(A: np.ndarray, m: int, gen: np.random.Generator) -> np.ndarray:
    """S A for a sparse JL matrix S of shape (m, n).

    Each of the n columns of S carries ``SJLT_NNZ_PER_COLUMN`` entries of
    +-1/sqrt(s) at uniformly random rows.
    """
    n = A.shape[0]
    s = SJLT_NNZ_PER_COLUMN
    rows = gen.integers(0, m, size=(n, s))
    signs = gen.integers(0, 2, size=(n, s)) * 2.0 - 1.0
    out = np.zeros((m, A.shape[1]))
    scale = 1.0 / math.sqrt(s)
    contrib = A[:, None, :] * (signs * scale)[:, :, None]
    np.add.at(out, rows.ravel(), contrib.reshape(n * s, -1))
    return out


def default_double_sketch_width(n: int) -> int:
    return int(math.ceil(8.0 * math.log(max(n, 2))))


def sjlt_approx_leverage(A: np.ndarray, C: np.ndarray, m1: int,
                         m2: int | None = None, seed: int = 0,
                         identity_sketch: bool = False) -> np.ndarray:
    """Approximate leverage scores via a sparse JL sketch of the Gram.

    Single-sketch mode returns ``||e_i^T A (A^T S1^T S1 A + C)^{-1/2}||^2``;
    when ``m2`` is given the inverse-sqrt factor is post-multiplied by a
    second sketch of width m2 before row norms are taken.

    ``identity_sketch`` replaces S1 by the identity (requires m1 == n);
    this degenerate path recovers the exact scores and exists for testing.
    """
    from .linalg import inv_sqrt

    A = np.asarray(A, dtype=np.float64)
    n, d = A.shape
    if m1 < d:
        raise ValueError(f"sketch width m1={m1} below cols(A)={d}")
    if m2 is not None and not m2 < m1:
        raise ValueError("double-sketch width m2 must satisfy m2 < m1")
    if identity_sketch:
        if m1 != n:
            raise ValueError("identity sketch requires m1 == rows(A)")
        SA = A
    else:
        SA = _sjlt_apply(A, m1, rsrng.generator(seed, 0))
    try:
        R = inv_sqrt(gram(SA) + C)
    except NotPositiveDefinite as exc:
        raise NotPositiveDefinite(
            "sketched Gram plus C is singular; increase m1", ) from exc
    B = A @ R
    if m2 is not None:
        S2T = _sjlt_apply(np.eye(d), m2, rsrng.generator(seed, 1)).T
        B = B @ S2T
    return np.einsum("ij,ij->i", B, B)


def build_plan(kind: PlanKind, A: np.ndarray, C: np.ndarray, *,
               mix: float = 0.5, m1: int | None = None,
               m2: int | None = None, seed: int = 0) -> SamplingPlan:
    """Construct a sampling plan of the requested kind for (A, C).

    ``d_eff`` is always the exact effective dimension of A given C except
    for the approximate-leverage kinds, where it is the sum of the
    approximate scores actually used for sampling.
    """
    A = np.asarray(A, dtype=np.float64)
    n, d = A.shape
    if n < 1:
        raise ValueError("A must have at least one row")

    if kind is PlanKind.UNIFORM:
        probs = np.full(n, 1.0 / n)
        return SamplingPlan(kind, probs,
                            effective_dimension(exact_leverage_scores(A, C)))
    if kind is PlanKind.ROW_NORM:
        sq = np.einsum("ij,ij->i", A, A)
        total = sq.sum()
        if total == 0.0:
            raise AllZeroRows("row-norm sampling on an all-zero matrix")
        return SamplingPlan(kind, sq / total,
                            effective_dimension(exact_leverage_scores(A, C)))
    if kind is PlanKind.EXACT_LEVERAGE:
        scores = exact_leverage_scores(A, C)
        d_eff = effective_dimension(scores)
        return SamplingPlan(kind, scores / scores.sum(), d_eff, scores=scores)
    if kind in (PlanKind.APPROX_LEVERAGE,
                PlanKind.DOUBLE_SKETCH_APPROX_LEVERAGE):
        if m1 is None:
            m1 = 8 * d
        if kind is PlanKind.DOUBLE_SKETCH_APPROX_LEVERAGE and m2 is None:
            m2 = min(default_double_sketch_width(n), m1 - 1)
        if kind is PlanKind.APPROX_LEVERAGE:
            m2 = None
        scores = sjlt_approx_leverage(A, C, m1, m2, seed=seed)
        total = scores.sum()
        if total <= 0:
            raise AllZeroRows("approximate leverage scores are all zero")
        return SamplingPlan(kind, scores / total, float(total), scores=scores)
    if kind is PlanKind.SHRINKAGE:
        if not 0.0 <= mix <= 1.0:
            raise ValueError("shrinkage mix must lie in [0, 1]")
        scores = exact_leverage_scores(A, C)
        d_eff = effective_dimension(scores)
        probs = mix / n + (1.0 - mix) * scores / scores.sum()
        return SamplingPlan(kind, probs, d_eff, scores=scores, mix=mix)
    raise ValueError(f"unknown plan kind {kind!r}")


def approximation_factors(plan: SamplingPlan,
                          exact_scores: np.ndarray) -> ApproxFactors:
    """(rho_min, rho_max) = extremes of l_i / (pi_i * d_eff).

    Rows with zero score and zero probability are excluded; a zero
    probability paired with a positive score is an error.
    """
    scores = np.asarray(exact_scores, dtype=np.float64)
    probs = plan.probs
    d_eff = effective_dimension(scores)
    if d_eff <= 0:
        raise ValueError("d_eff must be positive")
    bad = (probs == 0) & (scores > 0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ZeroProbabilityWithPositiveScore(
            f"row {i} has positive leverage score but zero probability",
            index=i)
    active = probs > 0
    ratios = scores[active] / (probs[active] * d_eff)
    idx_active = np.nonzero(active)[0]
    k = int(np.argmax(ratios))
    return ApproxFactors(rho_min=float(ratios.min()),
                         rho_max=float(ratios[k]),
                         argmax_index=int(idx_active[k]))


def draw(plan: SamplingPlan, m: int, seed: int) -> SketchDraw:
    """One with-replacement sketch of size m, deterministic given seed."""
    if m < 1:
        raise ValueError("sketch size m must be >= 1")
    gen = rsrng.generator(seed)
    cdf = np.cumsum(plan.probs)
    cdf[-1] = 1.0
    u = gen.random(m)
    indices = np.searchsorted(cdf, u, side="right")
    weights = 1.0 / np.sqrt(m * plan.probs[indices])
    return SketchDraw(m=m, indices=indices, weights=weights)


def full_draw(n: int) -> SketchDraw:
    """Deterministic draw covering every row once with unit weight.

    Degenerates the sketch to the full matrix; used for no-sketching test
    paths.
    """
    return SketchDraw(m=n, indices=np.arange(n), weights=np.ones(n))


def apply_sketch(sketch: SketchDraw, A: np.ndarray) -> np.ndarray:
    """The m-by-d sketched matrix: row s is weights[s] * A[indices[s]]."""
    A = np.asarray(A, dtype=np.float64)
    if sketch.indices.size and int(sketch.indices.max()) >= A.shape[0]:
        raise IndexOutOfRange(
            f"sketch index {int(sketch.indices.max())} >= rows(A)={A.shape[0]}")
    return A[sketch.indices] * sketch.weights[:, None]
