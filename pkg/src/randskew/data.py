"""Data ingestion: CSV / libsvm loaders and seeded synthetic generators."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as rsrng
from .errors import LabelDomainError, ParseError
from .linalg import as_dense


class SyntheticKind(enum.Enum):
    GAUSSIAN_IID = "gaussian"
    SPIKED = "spiked"
    COHERENT = "coherent"
    COUNTEREXAMPLE = "counterexample"


@dataclass(frozen=True)
class SyntheticSpec:
    kind: SyntheticKind
    n: int
    d: int
    decay: float = 0.5          # spiked: singular-value decay rate
    heavy_row_count: int = 0    # coherent: rows with 10x the base norm
    seed: int = 0


@dataclass(frozen=True)
class DataSource:
    format: str                 # "csv" | "libsvm" | "synthetic"
    path: str | None = None
    synthetic: SyntheticSpec | None = None
    libsvm_dim: int | None = None


def counterexample_matrix(d: int) -> np.ndarray:
    """The n = 2d matrix of scaled basis vectors with skewed first pair.

    Rows 0 and 1 are e_1/2 and (sqrt(3)/2) e_1; the remaining rows come in
    pairs e_i / sqrt(2).  A^T A = I_d and the leverage scores (with C = 0)
    are 1/4, 3/4, then 1/2 everywhere.
    """
    if d < 2:
        raise ValueError("counterexample needs d >= 2")
    A = np.zeros((2 * d, d))
    A[0, 0] = 0.5
    A[1, 0] = math.sqrt(3.0) / 2.0
    for i in range(1, d):
        A[2 * i, i] = A[2 * i + 1, i] = 1.0 / math.sqrt(2.0)
    return A


def synthetic_matrix(spec: SyntheticSpec) -> np.ndarray:
    gen = rsrng.generator(spec.seed, 7)
    n, d = spec.n, spec.d
    if spec.kind is SyntheticKind.COUNTEREXAMPLE:
        return counterexample_matrix(d)
    if spec.kind is SyntheticKind.GAUSSIAN_IID:
        return gen.standard_normal((n, d))
    if spec.kind is SyntheticKind.SPIKED:
        G = gen.standard_normal((n, d))
        scales = np.exp(-spec.decay * np.arange(d))
        return G * scales
    if spec.kind is SyntheticKind.COHERENT:
        G = gen.standard_normal((n, d))
        k = spec.heavy_row_count
        if not 0 <= k <= n:
            raise ValueError("heavy_row_count outside [0, n]")
        G[:k] *= 10.0
        return G
    raise ValueError(f"unknown synthetic kind {spec.kind!r}")


def synthetic_labels(A: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic +-1 labels from a random separating direction."""
    gen = rsrng.generator(seed, 11)
    w = gen.standard_normal(A.shape[1])
    margins = A @ w + 0.1 * gen.standard_normal(A.shape[0])
    y = np.where(margins >= 0, 1.0, -1.0)
    return y


def load_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """One sample per row; last column is the label."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}", line=lineno)
    if not rows:
        raise ParseError("empty CSV file", line=0)
    width = len(rows[0])
    if width < 2 or any(len(r) != width for r in rows):
        raise ParseError("rows must all have the same width >= 2", line=0)
    arr = np.asarray(rows, dtype=np.float64)
    return as_dense(arr[:, :-1], "features"), arr[:, -1]


def load_libsvm(path: str | Path,
                dim: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Standard sparse text format, densified."""
    labels = []
    entries = []
    max_feat = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
                row = {}
                for tok in parts[1:]:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    if idx < 1:
                        raise ValueError("feature indices are 1-based")
                    row[idx - 1] = float(val_s)
                    max_feat = max(max_feat, idx)
                entries.append(row)
            except (ValueError, IndexError) as exc:
                raise ParseError(f"line {lineno}: {exc}", line=lineno)
    if not labels:
        raise ParseError("empty libsvm file", line=0)
    d = dim if dim is not None else max_feat
    if max_feat > d:
        raise ParseError(f"feature index {max_feat} exceeds declared "
                         f"dimension {d}", line=0)
    A = np.zeros((len(labels), d))
    for i, row in enumerate(entries):
        for j, val in row.items():
            A[i, j] = val
    return as_dense(A, "features"), np.asarray(labels)


def load_data(source: DataSource,
              standardize: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Resolve a data source to (A, y); never normalizes silently."""
    if source.format == "csv":
        A, y = load_csv(source.path)
    elif source.format == "libsvm":
        A, y = load_libsvm(source.path, source.libsvm_dim)
    elif source.format == "synthetic":
        spec = source.synthetic
        A = synthetic_matrix(spec)
        y = synthetic_labels(A, spec.seed)
    else:
        raise ValueError(f"unknown data format {source.format!r}")
    if standardize:
        mu = A.mean(axis=0)
        sd = A.std(axis=0)
        sd[sd == 0] = 1.0
        A = (A - mu) / sd
    return A, y


def require_binary_labels(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise LabelDomainError("logistic labels must be in {-1, +1}")
    return y
