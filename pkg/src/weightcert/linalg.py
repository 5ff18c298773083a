"""Dense matrix/vector helpers and the matrix norms used by the margin bounds.

Everything works on float64 numpy arrays: matrices are 2-D, vectors 1-D.
The (p, q) norm applies p over columns and q over the resulting vector of
column norms, so ``matrix_pq_norm(W, 1, inf)`` is the max column l1 norm and
``matrix_pq_norm(W.T, 1, inf)`` is the max row l1 norm (the inf->inf operator
norm).
"""

from __future__ import annotations

import warnings

import numpy as np

_VALID_PQ = (1, 2, np.inf)


class DimensionError(ValueError):
    """Raised on empty operands or mismatched shapes."""


def _check_matrix(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={w.ndim}")
    if w.size == 0:
        raise DimensionError("empty matrix")
    return w


def _check_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got ndim={x.ndim}")
    return x


def _vector_norm(v: np.ndarray, p) -> float:
    if p == 1:
        return float(np.sum(np.abs(v)))
    if p == 2:
        return float(np.sqrt(np.sum(v * v)))
    return float(np.max(np.abs(v)))


def matrix_pq_norm(w, p, q) -> float:
    """||W||_{p,q}: l_p norm of each column, then l_q over those values."""
    w = _check_matrix(w)
    if p not in _VALID_PQ or q not in _VALID_PQ:
        raise ValueError(f"p and q must be in {{1, 2, inf}}, got ({p}, {q})")
    col_norms = np.array([_vector_norm(w[:, j], p) for j in range(w.shape[1])])
    return _vector_norm(col_norms, q)


def frobenius_norm(w) -> float:
    return matrix_pq_norm(w, 2, 2)


def max_column_l1(w) -> float:
    """||W||_{1,inf}, the 1->1 operator norm."""
    w = _check_matrix(w)
    return float(np.max(np.sum(np.abs(w), axis=0)))


def max_row_l1(w) -> float:
    """||W^T||_{1,inf}, the inf->inf operator norm."""
    w = _check_matrix(w)
    return float(np.max(np.sum(np.abs(w), axis=1)))


def spectral_norm(w, tol: float = 1e-10, max_iters: int = 1000) -> float:
    """Largest singular value via power iteration on W^T W.

    Deterministic: seeded with the normalized all-ones vector.  On
    non-convergence a warning is emitted and the last estimate returned.
    """
    w = _check_matrix(w)
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = w.shape[1]
    v = np.ones(n) / np.sqrt(n)
    sigma = 0.0
    for _ in range(max_iters):
        u = w @ v
        v_new = w.T @ u
        nrm = float(np.linalg.norm(v_new))
        if nrm == 0.0:
            return 0.0
        sigma_new = float(np.sqrt(nrm))
        v = v_new / nrm
        if sigma > 0 and abs(sigma_new - sigma) < tol * sigma_new:
            return sigma_new
        sigma = sigma_new
    warnings.warn(
        f"power iteration did not converge in {max_iters} iterations; "
        f"returning last estimate {sigma}"
    )
    return sigma


def transpose(w) -> np.ndarray:
    return _check_matrix(w).T.copy()


def matvec(w, x) -> np.ndarray:
    w = _check_matrix(w)
    x = _check_vector(x)
    if w.shape[1] != x.shape[0]:
        raise DimensionError(
            f"matvec shape mismatch: {w.shape} @ ({x.shape[0]},)"
        )
    return w @ x


def matmul(a, b) -> np.ndarray:
    a = _check_matrix(a)
    b = _check_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return a @ b
