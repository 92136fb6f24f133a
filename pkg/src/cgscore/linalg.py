"""SPD inversion and leave-one-out blocks of an inverse Gram matrix.

Notation for instance ``i`` of an m x m Gram matrix H and its inverse:

* ``g_i``, ``c_i``: column i of H without entry i, and ``H[i, i]``;
* ``h_i``, ``d_i``: the same blocks of ``H^-1``.

Deleting row/column i from H gives ``H_{-i}`` whose inverse is
``(H^-1)_{-i,-i} - h_i h_i^T / d_i``, so every leave-one-out quantity can be
read from one full inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

__all__ = [
    "InverseGram",
    "NotPositiveDefinite",
    "direct_cg_oracle",
    "invert_spd",
    "loo_column",
    "loo_inverse",
]

PIVOT_TOL = 1e-10


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Cholesky factorization hit a pivot at or below the tolerance."""

    def __init__(self, message: str, pivot_index: int | None = None, pivot: float | None = None):
        super().__init__(message)
        self.pivot_index = pivot_index
        self.pivot = pivot


@dataclass(frozen=True, eq=False)
class InverseGram:
    entries: np.ndarray
    min_pivot: float
    ridge: float = 0.0

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def diag(self) -> np.ndarray:
        return np.diagonal(self.entries)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def _square(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def _check_index(i: int, m: int) -> int:
    if not 0 <= i < m:
        raise IndexError(f"index {i} out of range for size {m}")
    return int(i)


def invert_spd(h, ridge: float | None = None, pivot_tol: float = PIVOT_TOL) -> InverseGram:
    """Invert a symmetric positive-definite matrix through its Cholesky factor.

    Cholesky pivots are the squared diagonal of the factor. If any pivot is
    ``<= pivot_tol`` and no ridge was requested, :class:`NotPositiveDefinite`
    is raised with the first failing index. With ``ridge`` the target is
    ``H + ridge * I``.
    """
    a = _square(h)
    if ridge is not None:
        if ridge < 0:
            raise ValueError(f"ridge must be non-negative, got {ridge}")
        a = a + ridge * np.eye(a.shape[0])
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefinite(
            f"matrix is not positive definite: pivot {info - 1} is non-positive", pivot_index=info - 1
        )
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    pivots = np.diagonal(c) ** 2
    min_pivot = float(pivots.min())
    if ridge is None:
        bad = np.flatnonzero(pivots <= pivot_tol)
        if bad.size:
            k = int(bad[0])
            raise NotPositiveDefinite(
                f"matrix is numerically singular: Cholesky pivot {k} = {pivots[k]:.3g} <= {pivot_tol:g}",
                pivot_index=k,
                pivot=float(pivots[k]),
            )
    inv, info = lapack.dpotri(c, lower=1)
    if info != 0:
        raise NotPositiveDefinite(f"dpotri failed with info={info}", pivot_index=info - 1 if info > 0 else None)
    # dpotri fills only the lower triangle; the upper one is zero (clean=1).
    # Mirroring by inv + inv.T doubles the diagonal, halving it back is exact.
    inv = inv + inv.T
    np.einsum("ii->i", inv)[:] *= 0.5
    return InverseGram(inv, min_pivot, 0.0 if ridge is None else float(ridge))


def loo_column(inv, i: int) -> tuple[np.ndarray, float]:
    """Return ``(h_i, d_i)``: column i of the inverse without entry i, and ``inv[i, i]``.

    ``h_i`` keeps the remaining indices in their original order.
    """
    a = _square(inv)
    i = _check_index(i, a.shape[0])
    col = a[:, i]
    return np.delete(col, i), float(col[i])


def loo_inverse(h, inv, i: int) -> np.ndarray:
    """Inverse of H with row/column i removed, via the Schur complement."""
    a = _square(inv)
    if np.shape(h) != a.shape:
        raise ValueError("Gram matrix and inverse have different shapes")
    i = _check_index(i, a.shape[0])
    h_i, d_i = loo_column(a, i)
    minor = np.delete(np.delete(a, i, axis=0), i, axis=1)
    return minor - np.outer(h_i, h_i) / d_i


def direct_cg_oracle(h, y, i: int) -> float:
    """CG(i) by definition: two independent LU inversions, no Schur shortcut.

    Test oracle only; O(m^3) per call.
    """
    a = _square(h)
    y = np.asarray(y, dtype=np.float64)
    i = _check_index(i, a.shape[0])
    a_minor = np.delete(np.delete(a, i, axis=0), i, axis=1)
    y_minor = np.delete(y, i)
    full = y @ np.linalg.inv(a) @ y
    minor = y_minor @ np.linalg.inv(a_minor) @ y_minor
    return float(full - minor)
