"""Small dense symmetric positive-definite linear algebra.

Everything the estimators need reduces to solving ``a x = b`` with a small
(p <= ~50) symmetric matrix that is positive definite in theory, plus
rank-one accumulations ``acc + w x x^T``. The factorization is a square-root
free LDL^T (Cholesky-style, no pivoting), so diagonal systems are solved
exactly.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "SingularMatrixError",
    "accumulate_outer",
    "is_rank_deficient",
    "ldl_factor",
    "spd_solve",
    "symmetrize",
]

JITTER_SCALE = 1e-10


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when an accumulated information matrix cannot be factorized."""


def symmetrize(a: NDArray[np.float64]) -> NDArray[np.float64]:
    """Return ``(a + a.T) / 2``, which is bit-exactly symmetric."""
    return 0.5 * (a + a.T)


SMALL_P = 12


def ldl_factor(a: NDArray[np.float64], rtol: float | None = None):
    """Factor a symmetric matrix as ``L diag(d) L^T``.

    Parameters
    ----------
    a : (p, p) array
        Symmetric matrix. Only the lower triangle is read.
    rtol : float, optional
        A pivot ``d[j]`` is rejected when ``d[j] <= rtol * a[j, j]``.
        Defaults to ``p * eps``.

    Returns
    -------
    (L, d) or None
        Unit lower-triangular ``L`` and pivots ``d``; ``None`` if a pivot
        is rejected (matrix not numerically positive definite).
    """
    p = a.shape[0]
    if rtol is None:
        rtol = p * np.finfo(np.float64).eps
    if p <= SMALL_P:
        return _ldl_factor_small(a.tolist(), rtol)
    L = np.eye(p)
    d = np.empty(p)
    for j in range(p):
        lj = L[j, :j]
        dj = a[j, j] - np.dot(lj * lj, d[:j])
        if not dj > rtol * max(a[j, j], 0.0) or not np.isfinite(dj):
            return None
        d[j] = dj
        if j + 1 < p:
            L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ (lj * d[:j])) / dj
    return L, d


def _ldl_factor_small(a: list, rtol: float):
    # same recurrence as the vectorized path, on Python floats (no numpy call overhead)
    p = len(a)
    L = [[0.0] * p for _ in range(p)]
    d = [0.0] * p
    for j in range(p):
        Lj = L[j]
        ld = [0.0] * j
        dj = a[j][j]
        for k in range(j):
            ld[k] = t = Lj[k] * d[k]
            dj -= Lj[k] * t
        if not dj > rtol * max(a[j][j], 0.0) or dj == float("inf"):
            return None
        d[j] = dj
        Lj[j] = 1.0
        for i in range(j + 1, p):
            Li = L[i]
            t = a[i][j]
            for k in range(j):
                t -= Li[k] * ld[k]
            Li[j] = t / dj
    return L, d


def _ldl_solve(L, d, b: NDArray[np.float64]):
    if isinstance(L, list):
        if b.ndim == 1:
            return np.array(_ldl_solve_small(L, d, b.tolist()))
        return np.array([_ldl_solve_small(L, d, col) for col in b.T.tolist()]).T
    p = L.shape[0]
    z = np.array(b, dtype=np.float64, copy=True)
    for j in range(1, p):
        z[j] -= L[j, :j] @ z[:j]
    z = z / d if z.ndim == 1 else z / d[:, None]
    for j in range(p - 2, -1, -1):
        z[j] -= L[j + 1 :, j] @ z[j + 1 :]
    return z


def _ldl_solve_small(L: list, d: list, z: list) -> list:
    p = len(z)
    for j in range(1, p):
        Lj = L[j]
        t = z[j]
        for k in range(j):
            t -= Lj[k] * z[k]
        z[j] = t
    for j in range(p):
        z[j] /= d[j]
    for j in range(p - 2, -1, -1):
        t = z[j]
        for i in range(j + 1, p):
            t -= L[i][j] * z[i]
        z[j] = t
    return z


def spd_solve(a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    """Solve ``a x = b`` for symmetric positive-definite ``a``.

    ``b`` may be a vector or a matrix of right-hand sides (one per column).
    If the plain factorization breaks down, it is retried once with
    ``1e-10 * trace(a) / p`` added to the diagonal.

    Raises
    ------
    SingularMatrixError
        If ``a`` cannot be factorized even after the jitter retry.
    ValueError
        On shape mismatch.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if b.ndim not in (1, 2) or b.shape[0] != a.shape[0]:
        raise ValueError(f"right-hand side shape {b.shape} does not match {a.shape}")

    fac = ldl_factor(a)
    if fac is None:
        p = a.shape[0]
        jitter = JITTER_SCALE * np.trace(a) / p
        if not jitter > 0 or not np.isfinite(jitter):
            raise SingularMatrixError("matrix has non-positive trace")
        fac = ldl_factor(a + jitter * np.eye(p))
        if fac is None:
            raise SingularMatrixError(
                "matrix is not positive definite even after diagonal jitter"
            )
    return _ldl_solve(*fac, b)


def is_rank_deficient(gram: ArrayLike, rtol: float = 1e-10) -> bool:
    """Check a Gram-type matrix for (near) collinear columns.

    Column ``j`` counts as collinear with the preceding ones when its LDL^T
    pivot, relative to ``gram[j, j]``, falls below ``rtol``; the ratio is
    ``1 - R^2`` of regressing that column on the earlier ones.
    """
    gram = np.asarray(gram, dtype=np.float64)
    if np.any(np.diag(gram) <= 0):
        return True
    return ldl_factor(gram, rtol=rtol) is None


def accumulate_outer(acc: ArrayLike, x: ArrayLike, w: float) -> NDArray[np.float64]:
    """Return ``acc + w * x x^T`` as a new array.

    ``w * (x_i * x_j)`` is formed identically for ``(i, j)`` and ``(j, i)``,
    so a symmetric ``acc`` stays exactly symmetric.
    """
    acc = np.asarray(acc, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or acc.shape != (x.size, x.size):
        raise ValueError(f"cannot accumulate vector of shape {x.shape} into {acc.shape}")
    if w < 0:
        raise ValueError("weight must be nonnegative")
    return acc + w * np.outer(x, x)
