"""Dense symmetric linear algebra primitives.

All matrices are plain ``numpy.ndarray`` in row-major order.  Operations
are pure functions; nothing here holds state.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NoConvergence, NotPositiveDefinite

# Numerical PSD tolerances.  Chosen so that ridge-regularized Hessians
# with lambda >= 1e-6 always pass.
SYMMETRY_RTOL = 1e-12
PSD_EIG_RTOL = 1e-10
PIVOT_RTOL = 1e-14


def as_dense(a, name: str = "matrix") -> np.ndarray:
    """Validate external input as a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def check_symmetric(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    scale = np.abs(M).max()
    if scale > 0 and np.abs(M - M.T).max() > SYMMETRY_RTOL * scale:
        raise ValueError(f"{name} is not symmetric to relative tolerance "
                         f"{SYMMETRY_RTOL}")
    return M


def gram(A: np.ndarray) -> np.ndarray:
    """A^T A, symmetrized against floating-point accumulation skew."""
    A = np.asarray(A, dtype=np.float64)
    if A.shape[0] < 1:
        raise ValueError("gram requires at least one row")
    G = A.T @ A
    return (G + G.T) / 2.0


def cholesky(M: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = M.

    Raises :class:`NotPositiveDefinite` (carrying the pivot index) when a
    pivot falls below ``PIVOT_RTOL * trace(M) / dim``.
    """
    M = check_symmetric(M)
    dim = M.shape[0]
    threshold = PIVOT_RTOL * np.trace(M) / dim
    L = np.zeros_like(M)
    for j in range(dim):
        pivot = M[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > threshold:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3e} at index {j} below threshold "
                f"{threshold:.3e}", pivot_index=j)
        L[j, j] = np.sqrt(pivot)
        if j + 1 < dim:
            L[j + 1:, j] = (M[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_spd(M: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve M X = B for symmetric positive definite M."""
    L = cholesky(M)
    B = np.asarray(B, dtype=np.float64)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    Y = solve_triangular(L, B, lower=True)
    X = solve_triangular(L.T, Y, lower=False)
    return X[:, 0] if squeeze else X


def solve_spd_from_factor(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve L L^T X = B given an existing Cholesky factor."""
    B = np.asarray(B, dtype=np.float64)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    Y = solve_triangular(L, B, lower=True)
    X = solve_triangular(L.T, Y, lower=False)
    return X[:, 0] if squeeze else X


def spd_inverse(M: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    Minv = solve_spd(M, np.eye(M.shape[0]))
    return (Minv + Minv.T) / 2.0


def spectral_norm(M: np.ndarray, tol: float = 1e-10,
                  max_iters: int = 10_000) -> float:
    """Largest |eigenvalue| of symmetric M by power iteration on M^2.

    Deterministic: starts from the normalized all-ones vector and
    re-randomizes (fixed auxiliary stream) only on stagnation.
    """
    M = check_symmetric(M)
    dim = M.shape[0]
    if dim < 1:
        raise ValueError("spectral_norm requires dim >= 1")
    if dim == 1:
        return abs(float(M[0, 0]))
    v = np.ones(dim) / np.sqrt(dim)
    rng = np.random.Generator(np.random.Philox(key=0x5EED))
    prev = np.inf
    for it in range(max_iters):
        w = M @ (M @ v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            if np.abs(M).max() == 0.0:
                return 0.0
            v = rng.standard_normal(dim)
            v /= np.linalg.norm(v)
            continue
        est = np.sqrt(norm_w)  # ||v|| == 1, so lambda^2 estimate is norm_w
        v = w / norm_w
        if abs(est - prev) <= tol * max(est, 1e-300):
            return float(est)
        if it > 0 and it % 500 == 0 and abs(est - prev) > 0.5 * abs(est):
            # stagnating oscillation; restart from a fresh direction
            v = rng.standard_normal(dim)
            v /= np.linalg.norm(v)
            prev = np.inf
            continue
        prev = est
    raise NoConvergence(f"power iteration did not converge in {max_iters} "
                        "iterations", iterations=max_iters)


def _eigh_pd(M: np.ndarray, name: str) -> tuple[np.ndarray, np.ndarray]:
    M = check_symmetric(M, name)
    evals, evecs = np.linalg.eigh(M)
    if evals[0] <= 0:
        raise NotPositiveDefinite(
            f"{name} has nonpositive eigenvalue {evals[0]:.3e}",
            pivot_index=0)
    return evals, evecs


def inv_sqrt(M: np.ndarray) -> np.ndarray:
    """M^{-1/2} for symmetric positive definite M, via eigen-decomposition."""
    evals, evecs = _eigh_pd(M, "inv_sqrt input")
    R = (evecs / np.sqrt(evals)) @ evecs.T
    return (R + R.T) / 2.0


def sqrt_psd(M: np.ndarray) -> np.ndarray:
    """M^{1/2} for symmetric positive semi-definite M."""
    M = check_symmetric(M)
    evals, evecs = np.linalg.eigh(M)
    evals = np.clip(evals, 0.0, None)
    R = (evecs * np.sqrt(evals)) @ evecs.T
    return (R + R.T) / 2.0


def psd_relative_error(X_hat: np.ndarray, X: np.ndarray) -> float:
    """Smallest eps with (1+eps)^{-1} X <= X_hat <= (1+eps) X in PSD order.

    Returns +inf when X_hat has a nonpositive generalized eigenvalue
    against X.  X must be positive definite.
    """
    R = inv_sqrt(X)
    W = R @ check_symmetric(X_hat, "X_hat") @ R
    evals = np.linalg.eigvalsh((W + W.T) / 2.0)
    lam_min, lam_max = evals[0], evals[-1]
    if lam_min <= 0:
        return float("inf")
    return float(max(lam_max - 1.0, 1.0 / lam_min - 1.0, 0.0))
