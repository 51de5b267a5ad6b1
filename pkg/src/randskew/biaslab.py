"""Monte-Carlo estimation of the inversion bias of sketched inverses.

For a sketching scheme producing A-tilde, the bias of interest is

    || H^{1/2} ( E[(A~^T A~ + C)^{-1}] - H^{-1} ) H^{1/2} ||,  H = A^T A + C,

measured in spectral norm and estimated by averaging over independent
trials.  Trials whose sketched Gram is numerically singular are discarded
and counted; this operationalizes the conditioning event of the theory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rsrng
from .debias import DebiasMode, DebiasSpec, apply_debias
from .errors import AllTrialsSingular, NotPositiveDefinite
from .hadamard import srht_apply, srht_draw
from .linalg import (cholesky, gram, psd_relative_error, spd_inverse,
                     spectral_norm, sqrt_psd)
from .sampling import (SamplingPlan, apply_sketch, draw,
                       exact_leverage_scores)
from scipy.linalg import solve_triangular

JACKKNIFE_BATCH = 64  # fixed for reproducibility


@dataclass(frozen=True)
class SrhtScheme:
    """Marker selecting the sign-flip Hadamard sketch instead of a plan."""
    n: int


@dataclass(frozen=True)
class BiasEstimate:
    m: int
    trials: int
    discarded: int
    bias: float
    stderr_proxy: float
    debias_mode: DebiasMode
    eps_two_sided: float  # smallest two-sided PSD sandwich factor minus one


class _PairwiseSum:
    """Deterministic pairwise tree reduction over a stream of matrices.

    The reduction tree depends only on the number of pushed items, so
    serial accumulation and any parallel schedule that merges in index
    order agree bitwise.
    """

    def __init__(self):
        self._stack: list[tuple[int, np.ndarray]] = []

    def push(self, value: np.ndarray) -> None:
        level = 0
        while self._stack and self._stack[-1][0] == level:
            _, prev = self._stack.pop()
            value = prev + value
            level += 1
        self._stack.append((level, value))

    def total(self) -> np.ndarray:
        if not self._stack:
            raise ValueError("empty reduction")
        acc = None
        for _, value in self._stack:
            acc = value if acc is None else value + acc
        return acc


def _sketched_matrix(scheme, A, m, debias, trial_seed):
    if isinstance(scheme, SrhtScheme):
        sd = srht_draw(A.shape[0], m, trial_seed)
        if debias.mode not in (DebiasMode.NONE, DebiasMode.SCALAR):
            raise ValueError("the Hadamard sketch only supports scalar "
                             "debiasing")
        sd = type(sd)(signs=sd.signs, sample=apply_debias(sd.sample, debias),
                      n_original=sd.n_original, n_padded=sd.n_padded)
        return srht_apply(sd, A)
    sk = apply_debias(draw(scheme, m, trial_seed), debias)
    return apply_sketch(sk, A)


def estimate_bias(A: np.ndarray, C: np.ndarray, plan, debias: DebiasSpec,
                  m: int, trials: int, seed: int) -> BiasEstimate:
    """Monte-Carlo inversion-bias estimate for one configuration.

    ``plan`` is a :class:`SamplingPlan` or :class:`SrhtScheme`.
    Deterministic given ``seed``; per-trial streams are split by trial
    index and reduced pairwise in index order.
    """
    if m < 1 or trials < 2:
        raise ValueError("need m >= 1 and trials >= 2")
    A = np.asarray(A, dtype=np.float64)
    d = A.shape[1]
    H = gram(A) + C
    H_inv = spd_inverse(H)
    H_half = sqrt_psd(H)

    total = _PairwiseSum()
    batch_sums: list[np.ndarray] = []
    batch_kept: list[int] = []
    batch = _PairwiseSum()
    in_batch = 0
    kept_in_batch = 0
    discarded = 0
    eye = np.eye(d)

    def flush():
        nonlocal batch, in_batch, kept_in_batch
        batch_sums.append(batch.total() if kept_in_batch else np.zeros((d, d)))
        batch_kept.append(kept_in_batch)
        batch = _PairwiseSum()
        in_batch = 0
        kept_in_batch = 0

    for t in range(trials):
        At = _sketched_matrix(plan, A, m, debias, rsrng.split(seed, t))
        try:
            L = cholesky(gram(At) + C)
        except NotPositiveDefinite:
            discarded += 1
        else:
            Y = solve_triangular(L, eye, lower=True)
            Q = Y.T @ Y
            total.push(Q)
            batch.push(Q)
            kept_in_batch += 1
        in_batch += 1
        if in_batch == JACKKNIFE_BATCH:
            flush()
    if in_batch:
        flush()

    kept = trials - discarded
    if kept == 0:
        raise AllTrialsSingular(
            f"all {trials} trials produced singular sketched Grams")
    grand = total.total()
    mean = grand / kept

    def weighted_bias(S, k):
        M = H_half @ (S / k - H_inv) @ H_half
        return spectral_norm((M + M.T) / 2.0)

    bias = weighted_bias(grand, kept)

    thetas = []
    for bs, bk in zip(batch_sums, batch_kept):
        rest = kept - bk
        if rest > 0:
            thetas.append(weighted_bias(grand - bs, rest))
    stderr = 0.0
    nb = len(thetas)
    if nb > 1:
        th = np.asarray(thetas)
        stderr = float(np.sqrt((nb - 1) / nb * np.sum((th - th.mean()) ** 2)))

    return BiasEstimate(m=m, trials=trials, discarded=discarded,
                        bias=float(bias), stderr_proxy=stderr,
                        debias_mode=debias.mode,
                        eps_two_sided=psd_relative_error(mean, H_inv))


def gaussian_sketch(A: np.ndarray, m: int, seed: int) -> np.ndarray:
    """S A with i.i.d. Normal(0, 1/m) entries of S; a test oracle.

    The inverse-Wishart identity E[(A~^T A~)^{-1}] = m/(m-d-1) (A^T A)^{-1}
    holds for m > d + 1.
    """
    A = np.asarray(A, dtype=np.float64)
    gen = rsrng.generator(seed)
    S = gen.standard_normal((m, A.shape[0])) / np.sqrt(m)
    return S @ A


def make_debias_spec(mode: DebiasMode, plan, A, C, m: int,
                     d_eff: float | None = None) -> DebiasSpec:
    """Build the debias spec a (plan, m) cell needs.

    Scalar mode uses the plan's d_eff (for the Hadamard scheme: the exact
    effective dimension of A, identical to the rotated matrix's by
    orthogonality).  Fine-grained modes recompute exact scores of A.
    """
    if mode is DebiasMode.NONE:
        return DebiasSpec.none()
    if d_eff is None:
        if isinstance(plan, SamplingPlan):
            d_eff = plan.d_eff
        else:
            d_eff = float(exact_leverage_scores(A, C).sum())
    if mode is DebiasMode.SCALAR:
        return DebiasSpec.scalar(m, d_eff)
    if not isinstance(plan, SamplingPlan):
        raise ValueError("fine-grained debiasing requires a sampling plan")
    scores = exact_leverage_scores(A, C)
    if mode is DebiasMode.FINE_GRAINED_EXACT:
        return DebiasSpec.fine_grained(plan, scores, m)
    raise ValueError(f"cannot build spec for mode {mode!r} without "
                     "approximate scores")


@dataclass(frozen=True)
class BiasSweepRow:
    scheme: str
    debias: DebiasMode
    estimate: BiasEstimate


def bias_sweep(A: np.ndarray, C: np.ndarray, plan_specs, debias_modes,
               m_grid, trials: int, seed: int) -> list[BiasSweepRow]:
    """Cross product of (scheme, debias mode, m) cells, deterministic order.

    ``plan_specs`` is a list of (name, plan-or-SrhtScheme) pairs; seeds
    are stream-split per cell so cells are independent of each other.
    """
    m_grid = list(m_grid)
    if not m_grid or any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise ValueError("m grid must be nonempty and ascending")
    rows = []
    for pi, (name, plan) in enumerate(plan_specs):
        for di, mode in enumerate(debias_modes):
            for mi, m in enumerate(m_grid):
                spec = make_debias_spec(mode, plan, A, C, m)
                est = estimate_bias(A, C, plan, spec, m, trials,
                                    rsrng.split(seed, pi, di, mi))
                rows.append(BiasSweepRow(scheme=name, debias=mode,
                                         estimate=est))
    return rows
