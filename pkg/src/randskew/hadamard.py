"""Fast Walsh-Hadamard transform and the sign-flip + uniform-row sketch.

The sketch is S H D A / sqrt(n): random column signs, Hadamard rotation,
then uniform with-replacement row sampling.  Inputs whose row count is not
a power of two are zero-padded; zero rows carry zero leverage and never
perturb A^T A.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rsrng
from .errors import NotPowerOfTwo
from .linalg import gram, inv_sqrt
from .sampling import SamplingPlan, SketchDraw, PlanKind, apply_sketch, draw


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def fwht_inplace(v: np.ndarray) -> np.ndarray:
    """In-place unnormalized Walsh-Hadamard transform along axis 0.

    Accepts a vector or a matrix (transform applied to each column).
    Self-inverse up to a factor of n.
    """
    v = np.ascontiguousarray(v, dtype=np.float64)
    n = v.shape[0]
    if not _is_power_of_two(n):
        raise NotPowerOfTwo(f"length {n} is not a power of two")
    flat = v.reshape(n, -1)
    h = 1
    while h < n:
        y = flat.reshape(n // (2 * h), 2, h, flat.shape[1])
        top = y[:, 0].copy()
        y[:, 0] += y[:, 1]
        y[:, 1] = top - y[:, 1]
        h *= 2
    return flat.reshape(v.shape)


@dataclass(frozen=True)
class SrhtDraw:
    signs: np.ndarray      # +-1, length n_padded
    sample: SketchDraw     # uniform draw over the padded rows
    n_original: int
    n_padded: int


def srht_draw(n: int, m: int, seed: int) -> SrhtDraw:
    """Random signs plus a uniform row sample for an n-row input."""
    n_padded = next_power_of_two(n)
    signs = rsrng.generator(seed, 0).integers(0, 2, size=n_padded) * 2.0 - 1.0
    plan = SamplingPlan(PlanKind.UNIFORM, np.full(n_padded, 1.0 / n_padded),
                        d_eff=float(n_padded))
    sample = draw(plan, m, rsrng.split(seed, 1))
    return SrhtDraw(signs=signs, sample=sample, n_original=n,
                    n_padded=n_padded)


def identity_srht_draw(n: int, signs: np.ndarray | None = None) -> SrhtDraw:
    """Full-coverage sample with the given (default all +1) signs.

    Test path: with m = n_padded and every padded row taken once, the
    sketch is exactly H D A / sqrt(n).
    """
    n_padded = next_power_of_two(n)
    if signs is None:
        signs = np.ones(n_padded)
    sample = SketchDraw(m=n_padded, indices=np.arange(n_padded),
                        weights=np.ones(n_padded))
    return SrhtDraw(signs=np.asarray(signs, dtype=np.float64), sample=sample,
                    n_original=n, n_padded=n_padded)


def _rotate(sketch: SrhtDraw, A: np.ndarray) -> np.ndarray:
    """H D A_padded / sqrt(n_padded)."""
    n, d = A.shape
    padded = np.zeros((sketch.n_padded, d))
    padded[:n] = A
    padded *= sketch.signs[:, None]
    fwht_inplace(padded)
    padded /= np.sqrt(sketch.n_padded)
    return padded


def srht_apply(sketch: SrhtDraw, A: np.ndarray) -> np.ndarray:
    """The m-by-d sketched matrix S H D A / sqrt(n)."""
    A = np.asarray(A, dtype=np.float64)
    if A.shape[0] != sketch.n_original:
        raise ValueError(
            f"rows(A)={A.shape[0]} does not match draw n={sketch.n_original}")
    return apply_sketch(sketch.sample, _rotate(sketch, A))


def rotated_leverage_scores(A: np.ndarray, C: np.ndarray,
                            signs: np.ndarray) -> np.ndarray:
    """Leverage scores of H D A / sqrt(n) given C.

    The rotation is orthogonal, so the scores sum to the effective
    dimension of A itself.
    """
    A = np.asarray(A, dtype=np.float64)
    R = inv_sqrt(gram(A) + C)
    sketch = identity_srht_draw(A.shape[0], signs=signs)
    B = _rotate(sketch, A @ R)
    return np.einsum("ij,ij->i", B, B)
