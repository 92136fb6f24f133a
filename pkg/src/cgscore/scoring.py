"""Complexity-gap scores for every instance of a signed (binary) view.

With ``s_i = y_{-i}^T h_i`` and ``d_i = (H^-1)_{ii}``::

    CG(i) = (s_i / sqrt(d_i) + y_i sqrt(d_i))**2
          = s_i**2 / d_i  +  2 y_i s_i  +  y_i**2 d_i
            partial_sq       partial_cross  partial_diag

``cg`` is always evaluated in the squared form; the three partials are
reported separately and are allowed to cancel.

Related quantities computed alongside:

* ``cg_prime``: the same leave-one-out gap with H in place of ``H^-1``,
  ``2 y_i (g_i^T y_{-i}) + y_i**2 c_i``; needs no inversion.
* ``margin``: ``y_i (y_{-i}^T g_i)``, same-class kernel mass minus
  other-class kernel mass.
* ``cg_approx``: ``8 margin**2 - 8 margin + 2``, valid when ``H^-1 ~ 2 I``.
* ``acc_proxy``: ``(H^-1 y)_i = h_i^T y_{-i} + y_i d_i``.
* ``v_norm``: ``(2 / m) * cg`` with m the size of the view.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from cgscore.linalg import InverseGram, invert_spd, loo_column

__all__ = [
    "ScoreArrays",
    "ScoreRecord",
    "cg_all",
    "cg_approx",
    "cg_prime",
    "cg_score",
    "score_arrays",
    "similarity_margin",
]


class ScoringError(ValueError):
    pass


class ScoreRecord(NamedTuple):
    index: int
    sign: float
    cg: float
    partial_sq: float
    partial_cross: float
    partial_diag: float
    acc_proxy: float
    v_norm: float
    cg_prime: float | None = None
    margin: float | None = None
    cg_approx: float | None = None


@dataclass(frozen=True, eq=False)
class ScoreArrays:
    """Column-oriented scores for a whole view (one entry per view position)."""

    index: np.ndarray
    sign: np.ndarray
    cg: np.ndarray
    partial_sq: np.ndarray
    partial_cross: np.ndarray
    partial_diag: np.ndarray
    acc_proxy: np.ndarray
    v_norm: np.ndarray
    cg_prime: np.ndarray
    margin: np.ndarray
    cg_approx: np.ndarray

    def __len__(self) -> int:
        return self.cg.size

    def records(self) -> list[ScoreRecord]:
        cols = [getattr(self, f.name).tolist() for f in fields(self)]
        return [ScoreRecord(*row) for row in zip(*cols)]


def _signs(y, m: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (m,):
        raise ScoringError(f"label vector has shape {y.shape}, expected ({m},)")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ScoringError("labels must be exactly +1 or -1")
    return y


def _check_index(i: int, m: int) -> int:
    if not 0 <= i < m:
        raise IndexError(f"index {i} out of range for size {m}")
    return int(i)


def cg_approx(margin):
    """Geometric approximation ``8 margin^2 - 8 margin + 2``."""
    return 8.0 * margin * margin - 8.0 * margin + 2.0


def similarity_margin(h, y, i: int) -> float:
    a = np.asarray(h, dtype=np.float64)
    y = _signs(y, a.shape[0])
    i = _check_index(i, a.shape[0])
    g = np.delete(a[:, i], i)
    return float(y[i] * (np.delete(y, i) @ g))


def cg_prime(h, y, i: int) -> float:
    a = np.asarray(h, dtype=np.float64)
    y = _signs(y, a.shape[0])
    i = _check_index(i, a.shape[0])
    g = np.delete(a[:, i], i)
    return float(2.0 * y[i] * (g @ np.delete(y, i)) + y[i] ** 2 * a[i, i])


def cg_score(inv, y, i: int, h=None, index: int | None = None) -> ScoreRecord:
    """Score instance ``i`` from the i-th column of the inverse Gram matrix.

    ``h`` (the Gram matrix itself) is optional; when given, the record also
    carries ``cg_prime``, ``margin`` and ``cg_approx``.
    """
    a = np.asarray(inv, dtype=np.float64)
    m = a.shape[0]
    y = _signs(y, m)
    i = _check_index(i, m)
    h_i, d_i = loo_column(a, i)
    if not d_i > 0:
        raise ScoringError(f"inverse diagonal d_{i} = {d_i!r} is not positive; inverse is corrupt")
    s = float(np.delete(y, i) @ h_i)
    root = np.sqrt(d_i)
    cg = (s / root + y[i] * root) ** 2
    extra = {}
    if h is not None:
        margin = similarity_margin(h, y, i)
        extra = dict(cg_prime=cg_prime(h, y, i), margin=margin, cg_approx=cg_approx(margin))
    return ScoreRecord(
        index=i if index is None else int(index),
        sign=float(y[i]),
        cg=float(cg),
        partial_sq=s * s / d_i,
        partial_cross=2.0 * y[i] * s,
        partial_diag=float(y[i] ** 2 * d_i),
        acc_proxy=s + y[i] * d_i,
        v_norm=2.0 / m * float(cg),
        **extra,
    )


def score_arrays(h, y, inv: InverseGram | None = None, indices=None, ridge: float | None = None) -> ScoreArrays:
    """All scores of a view from a single shared inverse.

    One Cholesky inversion (skipped if ``inv`` is supplied) plus O(m^2) work.
    """
    a = np.asarray(h, dtype=np.float64)
    m = a.shape[0]
    y = _signs(y, m)
    if inv is None:
        inv = invert_spd(a, ridge=ridge)
    b = np.asarray(inv, dtype=np.float64)
    d = np.diagonal(b).copy()
    if np.any(d <= 0):
        k = int(np.flatnonzero(d <= 0)[0])
        raise ScoringError(f"inverse diagonal d_{k} = {d[k]!r} is not positive; inverse is corrupt")
    acc = b @ y
    # y_{-i}^T h_i = (H^-1 y)_i - d_i y_i
    s = acc - d * y
    root = np.sqrt(d)
    cg = (s / root + y * root) ** 2
    c = np.diagonal(a)
    hy_off = a @ y - c * y
    margin = y * hy_off
    idx = np.arange(m) if indices is None else np.asarray(indices, dtype=np.int64)
    if idx.shape != (m,):
        raise ScoringError("indices must have one entry per view position")
    return ScoreArrays(
        index=idx,
        sign=y.copy(),
        cg=cg,
        partial_sq=s * s / d,
        partial_cross=2.0 * y * s,
        partial_diag=y * y * d,
        acc_proxy=s + y * d,
        v_norm=(2.0 / m) * cg,
        cg_prime=2.0 * y * hy_off + y * y * c,
        margin=margin,
        cg_approx=cg_approx(margin),
    )


def cg_all(h, y, indices=None, ridge: float | None = None) -> list[ScoreRecord]:
    """One :class:`ScoreRecord` per instance, ordered by view position."""
    return score_arrays(h, y, indices=indices, ridge=ridge).records()
