"""Linear assignment in maximization form.

Permutations are index arrays ``perm`` of length ``d``. The dense matrix they
stand for has ``P[i, perm[i]] = 1``, so that

    (P @ A)[i] == A[perm[i]]          (permute_rows)
    <P, S>_F   == sum_i S[i, perm[i]] (objective)

and ``<P, m0 m1^T>_F == m0 @ (P @ m1)``. Row ``i`` of the reference (q0) is
matched with row ``perm[i]`` of the other model (q1).
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment


def _check_perm(perm: np.ndarray) -> np.ndarray:
    perm = np.asarray(perm)
    if perm.ndim != 1 or not np.issubdtype(perm.dtype, np.integer):
        raise ValueError("a permutation must be a 1-D integer array")
    if not np.array_equal(np.sort(perm), np.arange(perm.size)):
        raise ValueError("not a bijection on {0..d-1}")
    return perm


def solve_lap_max(scores) -> np.ndarray:
    """Return the permutation maximizing ``sum_i scores[i, perm[i]]``."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[0] != scores.shape[1]:
        raise ValueError(f"score matrix must be square, got shape {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise ValueError("score matrix has non-finite entries")
    rows, cols = linear_sum_assignment(scores, maximize=True)
    perm = np.empty(scores.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


def objective(perm, scores) -> float:
    perm = np.asarray(perm)
    scores = np.asarray(scores, dtype=float)
    return float(scores[np.arange(perm.size), perm].sum())


def permute_rows(perm, a) -> np.ndarray:
    perm = np.asarray(perm)
    a = np.asarray(a)
    if a.shape[0] != perm.size:
        raise ValueError(f"permutation of size {perm.size} applied to {a.shape[0]} rows")
    return a[perm]


def permute_cols(perm, a) -> np.ndarray:
    """Columns of ``A @ P^T``: column ``j`` becomes column ``perm[j]``."""
    perm = np.asarray(perm)
    a = np.asarray(a)
    if a.shape[1] != perm.size:
        raise ValueError(f"permutation of size {perm.size} applied to {a.shape[1]} columns")
    return a[:, perm]


def compose(p2, p1) -> np.ndarray:
    """Index array of ``P2 @ P1``: apply ``p1`` first, then ``p2``."""
    return np.asarray(p1)[np.asarray(p2)]


def invert(perm) -> np.ndarray:
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return inv


def identity(d: int) -> np.ndarray:
    return np.arange(d, dtype=np.int64)


def to_matrix(perm) -> np.ndarray:
    perm = np.asarray(perm)
    mat = np.zeros((perm.size, perm.size))
    mat[np.arange(perm.size), perm] = 1.0
    return mat
