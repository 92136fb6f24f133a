"""Statistics and diagnostics over computed scores.

Everything here returns plain numbers or arrays ready to be dumped as JSON;
nothing is plotted.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from cgscore.dataset import NoiseMask
from cgscore.rng import make_rng

__all__ = [
    "CorrelationResult",
    "DetectionCurve",
    "class_stats",
    "correlate",
    "detection_curve",
    "inverse_identity_diagnostic",
    "partial_sign_split",
    "pearson",
    "prune_order",
    "rankdata",
    "sigma_spectrum_check",
    "spearman",
]

DEFAULT_GRID = np.linspace(0.01, 1.0, 100)


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("need at least 2 observations")
    return a, b


def rankdata(x) -> np.ndarray:
    """1-based ranks; tied values share the average of their positions."""
    a = np.asarray(x, dtype=np.float64).ravel()
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    # start of each run of equal values
    starts = np.flatnonzero(np.r_[True, sorted_a[1:] != sorted_a[:-1]])
    ends = np.r_[starts[1:], a.size]
    avg = 0.5 * (starts + ends - 1) + 1.0
    ranks = np.empty(a.size)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def pearson(a, b) -> float:
    a, b = _pair(a, b)
    da = a - a.mean()
    db = b - b.mean()
    sa = math.sqrt(float(da @ da))
    sb = math.sqrt(float(db @ db))
    if sa == 0.0 or sb == 0.0:
        raise ValueError("pearson correlation undefined for a constant vector")
    r = float(da @ db) / (sa * sb)
    return max(-1.0, min(1.0, r))


def spearman(a, b) -> float:
    a, b = _pair(a, b)
    return pearson(rankdata(a), rankdata(b))


@dataclass(frozen=True)
class CorrelationResult:
    spearman: float
    pearson: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def correlate(a, b) -> CorrelationResult:
    a, b = _pair(a, b)
    return CorrelationResult(spearman(a, b), pearson(a, b), a.size)


@dataclass(frozen=True, eq=False)
class DetectionCurve:
    fractions: np.ndarray
    recall: np.ndarray
    auc: float
    area: float

    def to_dict(self) -> dict:
        return {
            "fractions": self.fractions.tolist(),
            "recall": self.recall.tolist(),
            "auc": self.auc,
            "area": self.area,
        }


def _flipped(mask) -> np.ndarray:
    return np.asarray(mask.flipped if isinstance(mask, NoiseMask) else mask, dtype=bool)


def _recall_curve(order: np.ndarray, flipped: np.ndarray, grid: np.ndarray) -> np.ndarray:
    n = flipped.size
    hits = np.cumsum(flipped[order])
    k = np.ceil(grid * n - 1e-9).astype(np.int64)
    k = np.clip(k, 0, n)
    found = np.where(k > 0, hits[np.maximum(k - 1, 0)], 0)
    return found / flipped.sum()


def detection_curve(scores, mask, grid=None) -> DetectionCurve:
    """Recall of flipped labels when inspecting the top ``ceil(f*n)`` scores.

    Ties go to the lower index. ``area`` is the trapezoidal area under the
    curve over ``grid``; ``auc`` divides it by the area of the perfect ranking
    over the same grid, so a ranking that lists every noisy instance first
    scores exactly 1.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    flipped = _flipped(mask)
    if flipped.shape != scores.shape:
        raise ValueError(f"length mismatch: {scores.size} scores vs {flipped.size} mask entries")
    if not flipped.any():
        raise ValueError("mask has no flipped instances")
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=np.float64)
    if np.any(grid <= 0) or np.any(grid > 1) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing within (0, 1]")
    idx = np.arange(scores.size)
    order = np.lexsort((idx, -scores))
    recall = _recall_curve(order, flipped, grid)
    ideal = _recall_curve(np.lexsort((idx, ~flipped)), flipped, grid)
    if grid.size > 1:
        area = float(np.trapezoid(recall, grid))
        ideal_area = float(np.trapezoid(ideal, grid))
    else:
        area, ideal_area = float(recall[0]), float(ideal[0])
    auc = area / ideal_area if ideal_area > 0 else 1.0
    return DetectionCurve(grid.copy(), recall, min(1.0, auc), area)


def partial_sign_split(partial_cross, mask) -> dict[str, int]:
    """Cross-tabulate the sign of the label-dependent partial score with noise status.

    Positive means ``> 0``; zero counts as negative.
    """
    pc = np.asarray(partial_cross, dtype=np.float64).ravel()
    flipped = _flipped(mask)
    if pc.shape != flipped.shape:
        raise ValueError("partial scores and mask are not aligned")
    pos = pc > 0
    return {
        "pos_noisy": int(np.sum(pos & flipped)),
        "neg_noisy": int(np.sum(~pos & flipped)),
        "pos_clean": int(np.sum(pos & ~flipped)),
        "neg_clean": int(np.sum(~pos & ~flipped)),
    }


def prune_order(scores, labels, direction: str = "low-first") -> np.ndarray:
    """Class-stratified removal order.

    Within each class instances are sorted by score (ties by index); the
    classes are then interleaved round-robin in ascending label order, so
    any prefix removes equal counts from every class that still has
    instances left, up to one.
    """
    if direction not in ("low-first", "high-first"):
        raise ValueError(f"direction must be 'low-first' or 'high-first', got {direction!r}")
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels are not aligned")
    idx = np.arange(scores.size)
    key = scores if direction == "low-first" else -scores
    order = np.lexsort((idx, key, labels))
    sorted_labels = labels[order]
    _, starts, counts = np.unique(sorted_labels, return_index=True, return_counts=True)
    rank_in_class = np.arange(order.size) - np.repeat(starts, counts)
    final = np.lexsort((sorted_labels, rank_in_class))
    return order[final]


def class_stats(scores, labels, bins: int = 20) -> dict:
    """Per-class mean, population std and a histogram on shared bin edges."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.size == 0:
        raise ValueError("empty score table")
    lo, hi = float(scores.min()), float(scores.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    out = {}
    for c in np.unique(labels):
        s = scores[labels == c]
        counts, _ = np.histogram(s, bins=edges)
        out[int(c)] = {
            "count": int(s.size),
            "mean": float(s.mean()),
            "std": float(s.std()),
            "histogram": counts.tolist(),
            "bin_edges": edges.tolist(),
        }
    return out


def inverse_identity_diagnostic(inv) -> dict[str, float]:
    """How close an inverse Gram matrix is to a multiple of the identity."""
    a = np.asarray(inv, dtype=np.float64)
    m = a.shape[0]
    if m < 2 or a.shape != (m, m):
        raise ValueError("need a square matrix of size >= 2")
    diag = np.diagonal(a)
    mean_diag = float(diag.mean())
    off_sq = float(np.sum(a * a) - np.sum(diag * diag))
    offdiag_rms = math.sqrt(max(off_sq, 0.0) / (m * (m - 1)))
    return {"mean_diag": mean_diag, "offdiag_rms": offdiag_rms, "ratio": offdiag_rms / abs(mean_diag)}


def _random_x(rng: np.random.Generator, m: int, max_retries: int, cond_limit: float) -> np.ndarray:
    for _ in range(max_retries + 1):
        x = rng.standard_normal((m, m)) / math.sqrt(m)
        if np.linalg.cond(x) < cond_limit:
            return x
    raise np.linalg.LinAlgError(f"random matrix singular after {max_retries} retries")


def sigma_spectrum_check(h, trials: int, seed: int, max_retries: int = 10, cond_limit: float = 1e12) -> dict:
    """Test whether H looks like ``X^T S X`` for a random X with variance 1/m entries.

    S is estimated by averaging ``X^-T H X^-1`` over ``trials`` draws; the
    spectrum of ``X^T S X`` for a fresh draw is then compared with that of H.
    Diagnostic only: ``rel_gap = ||eig_H - eig_model|| / ||eig_H||``.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    a = np.asarray(h, dtype=np.float64)
    m = a.shape[0]
    if a.shape != (m, m):
        raise ValueError("H must be square")
    rng = make_rng(seed)
    sigma = np.zeros_like(a)
    for _ in range(trials):
        x = _random_x(rng, m, max_retries, cond_limit)
        # X^-T H X^-1 = (X^-T (X^-T H)^T)^T, kept symmetric
        left = np.linalg.solve(x.T, a)
        est = np.linalg.solve(x.T, left.T).T
        sigma += 0.5 * (est + est.T)
    sigma /= trials
    x = _random_x(rng, m, max_retries, cond_limit)
    model = x.T @ sigma @ x
    eig_h = np.linalg.eigvalsh(a)
    eig_model = np.linalg.eigvalsh(0.5 * (model + model.T))
    rel_gap = float(np.linalg.norm(eig_h - eig_model) / np.linalg.norm(eig_h))
    return {"eig_H": eig_h, "eig_model": eig_model, "rel_gap": rel_gap}
