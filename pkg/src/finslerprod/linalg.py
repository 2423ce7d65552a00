"""Small dense linear algebra: pivoted Cholesky, guarded inversion, jet solves."""

from __future__ import annotations

import numpy as np

from .errors import SingularMatrixError
from .jet import Jet, stack

SINGULAR_RTOL = 1e-12


def pivoted_cholesky(a: np.ndarray, tol: float = 0.0):
    """Diagonally pivoted Cholesky ``P^T A P = L L^T``.

    Returns ``(L, perm, min_pivot)``; ``min_pivot > tol`` iff ``a`` is
    numerically positive definite. On failure ``L`` holds the partial factor.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    perm = np.arange(n)
    L = np.zeros_like(a)
    work = a.copy()
    min_pivot = np.inf
    for k in range(n):
        diag = np.diag(work)[k:]
        p = k + int(np.argmax(diag))
        if p != k:
            work[[k, p], :] = work[[p, k], :]
            work[:, [k, p]] = work[:, [p, k]]
            L[[k, p], :k] = L[[p, k], :k]
            perm[[k, p]] = perm[[p, k]]
        pivot = work[k, k]
        min_pivot = min(min_pivot, pivot)
        if not pivot > tol:
            return L, perm, float(pivot)
        L[k, k] = np.sqrt(pivot)
        L[k + 1 :, k] = work[k + 1 :, k] / L[k, k]
        work[k + 1 :, k + 1 :] -= np.outer(L[k + 1 :, k], L[k + 1 :, k])
    return L, perm, float(min_pivot)


def is_positive_definite(a: np.ndarray) -> bool:
    scale = float(np.max(np.abs(a))) if np.size(a) else 0.0
    return pivoted_cholesky(a, tol=SINGULAR_RTOL * scale)[2] > SINGULAR_RTOL * scale


def check_nonsingular(a: np.ndarray, what: str = "matrix") -> None:
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    scale = np.max(np.abs(a), axis=(-2, -1)) ** n
    det = np.linalg.det(a)
    bad = ~(np.abs(det) >= SINGULAR_RTOL * scale) | (scale == 0)
    if np.any(bad):
        raise SingularMatrixError(f"{what} is singular (|det| = {np.min(np.abs(det)):.3g})")


def guarded_inverse(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    """LU (partial pivoting) inverse, refusing numerically singular input."""
    check_nonsingular(a, what)
    return np.linalg.inv(a)


def solve_jets(a: Jet, b: Jet) -> Jet:
    """Solve ``a w = b`` coefficientwise for batched jets ``a (..., n, n)``, ``b (..., n)``.

    Elimination runs without pivoting. Positive definite tensors always have
    nonzero pivots; for indefinite (nondegenerate) product tensors an exactly
    zero pivot surfaces as a DomainError from jet division.
    """
    n = a.shape[-1]
    rows = [a[(slice(None),) * (len(a.shape) - 2) + (i,)] for i in range(n)]
    rhs = [b[(slice(None),) * (len(b.shape) - 1) + (i,)] for i in range(n)]
    lead = (slice(None),) * (len(a.shape) - 2)

    for k in range(n):
        inv = 1.0 / rows[k][lead + (k,)]
        for i in range(k + 1, n):
            factor = rows[i][lead + (k,)] * inv
            rows[i] = rows[i] - _expand(factor) * rows[k]
            rhs[i] = rhs[i] - factor * rhs[k]
    sol: list = [None] * n
    for i in range(n - 1, -1, -1):
        acc = rhs[i]
        for j in range(i + 1, n):
            acc = acc - rows[i][lead + (j,)] * sol[j]
        sol[i] = acc / rows[i][lead + (i,)]
    return stack(sol, axis=-1)


def _expand(j: Jet) -> Jet:
    return Jet(j.coeffs[..., None, :], j.nvars, j.order)
