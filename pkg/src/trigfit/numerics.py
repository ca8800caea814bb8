"""Cholesky-based solves for the small symmetric positive definite systems
formed by (weighted) trigonometric Gram matrices."""
from __future__ import annotations

import numpy as np

__all__ = [
    "NotPositiveDefinite",
    "MAX_DIM",
    "cholesky",
    "spd_solve",
    "spd_inverse",
]

MAX_DIM = 64
_EPS = np.finfo(float).eps


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot falls below the rank-deficiency threshold."""

    def __init__(self, message: str, pivot_index: int | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index


def _as_spd(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    p = a.shape[0]
    if p == 0:
        raise ValueError("empty matrix")
    if p > MAX_DIM:
        raise ValueError(f"matrix dimension {p} exceeds the cap of {MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = max(np.max(np.abs(a)), np.finfo(float).tiny)
    if np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    return a


def cholesky(a) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == a``.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is ``<= p * eps * max(diag(a))``, which is how an aliased or
        otherwise rank-deficient design shows up.
    """
    a = _as_spd(a)
    p = a.shape[0]
    threshold = p * _EPS * max(float(np.max(np.diag(a))), 0.0)
    L = np.zeros_like(a)
    for j in range(p):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > threshold:
            raise NotPositiveDefinite(
                f"pivot {j} is {pivot:.3e}, not above threshold {threshold:.3e}; "
                "matrix is singular or not positive definite",
                pivot_index=j,
            )
        d = np.sqrt(pivot)
        L[j, j] = d
        if j + 1 < p:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / d
    return L


def _cho_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    p = L.shape[0]
    y = np.array(b, dtype=float, copy=True)
    # forward substitution, then backward with L.T; b may hold several columns
    for i in range(p):
        y[i] = (y[i] - L[i, :i] @ y[:i]) / L[i, i]
    for i in range(p - 1, -1, -1):
        y[i] = (y[i] - L[i + 1:, i] @ y[i + 1:]) / L[i, i]
    return y


def spd_solve(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive definite ``a``.

    ``b`` may be a vector of length ``p`` or a ``(p, m)`` matrix.
    """
    L = cholesky(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != L.shape[0]:
        raise ValueError(f"right-hand side has {b.shape[0]} rows, matrix has {L.shape[0]}")
    return _cho_solve(L, b)


def spd_inverse(a) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix, symmetrized."""
    L = cholesky(a)
    inv = _cho_solve(L, np.eye(L.shape[0]))
    return 0.5 * (inv + inv.T)
