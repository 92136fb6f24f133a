"""One-vs-rest scoring of k-class datasets with random negative subsampling.

For class ``c`` with ``p`` members, each run builds a view holding every
member of ``c`` (sign +1) and ``min(neg_ratio * p, pool)`` instances drawn
uniformly without replacement from all other classes pooled (sign -1).
Scores of the positives are averaged over runs.

Runs draw from independent streams seeded by :func:`cgscore.rng.derive_seed`,
so results depend only on ``(seed, class, run)``. Runs may overlap.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from cgscore.dataset import Dataset, dataset_fingerprint
from cgscore.kernel import BinaryView, gram
from cgscore.linalg import NotPositiveDefinite
from cgscore.rng import derive_seed, make_rng
from cgscore.scoring import score_arrays

__all__ = [
    "AVERAGED_FIELDS",
    "RunFailure",
    "ScoreTable",
    "StochasticConfig",
    "binary_view_for_class",
    "recommended_runs",
    "score_all",
    "score_class",
    "read_score_csv",
    "write_score_csv",
]

SCORE_CSV_COLUMNS = ("cg", "cg_prime", "partial_sq", "partial_cross", "partial_diag", "cg_approx", "v_norm")

AVERAGED_FIELDS = (
    "cg",
    "cg_prime",
    "partial_sq",
    "partial_cross",
    "partial_diag",
    "cg_approx",
    "v_norm",
    "margin",
    "acc_proxy",
)


class RunFailure(NotPositiveDefinite):
    """A run's Gram matrix could not be inverted."""

    def __init__(self, class_id: int, run_index: int, cause: NotPositiveDefinite):
        super().__init__(
            f"class {class_id}, run {run_index}: {cause}",
            pivot_index=cause.pivot_index,
            pivot=cause.pivot,
        )
        self.class_id = class_id
        self.run_index = run_index


@dataclass(frozen=True)
class StochasticConfig:
    neg_ratio: int = 3
    runs: int = 1
    seed: int = 0
    ridge: float | None = None

    def __post_init__(self):
        if int(self.neg_ratio) != self.neg_ratio or self.neg_ratio < 1:
            raise ValueError(f"neg_ratio must be a positive integer, got {self.neg_ratio}")
        if int(self.runs) != self.runs or self.runs < 1:
            raise ValueError(f"runs must be a positive integer, got {self.runs}")
        if self.ridge is not None and self.ridge < 0:
            raise ValueError(f"ridge must be non-negative, got {self.ridge}")


def recommended_runs(n_positive: int, pool_size: int, neg_ratio: int, n_other_classes: int = 1) -> int:
    """Runs needed so that, ignoring overlap, each other class is at least half covered.

    One run draws ``neg_ratio * n_positive`` negatives spread over the
    ``pool_size`` candidates; half of every class is reached after about
    ``pool_size / (2 * neg_ratio * n_positive)`` runs.
    """
    del n_other_classes  # pooled sampling covers classes proportionally
    per_run = min(neg_ratio * n_positive, pool_size)
    if per_run >= pool_size:
        return 1
    return max(1, math.ceil(pool_size / (2 * per_run)))


def binary_view_for_class(dataset: Dataset, class_c: int, neg_ratio: int, seed: int, run_index: int) -> BinaryView:
    """One-vs-rest view for ``class_c``; indices are in ascending dataset order."""
    labels = dataset.labels
    pos = np.flatnonzero(labels == class_c)
    if pos.size == 0:
        raise ValueError(f"class {class_c} not present in dataset")
    pool = np.flatnonzero(labels != class_c)
    if pool.size == 0:
        raise ValueError(f"no negatives available for class {class_c}")
    k = min(int(neg_ratio) * pos.size, pool.size)
    if k == pool.size:
        neg = pool
    else:
        rng = make_rng(derive_seed(seed, class_c, run_index))
        neg = np.sort(rng.choice(pool, size=k, replace=False))
    idx = np.sort(np.concatenate([pos, neg]))
    signs = np.where(labels[idx] == class_c, 1.0, -1.0)
    return BinaryView(idx, signs)


def _run_once(dataset: Dataset, class_c: int, config: StochasticConfig, run_index: int) -> tuple[np.ndarray, dict]:
    view = binary_view_for_class(dataset, class_c, config.neg_ratio, config.seed, run_index)
    h = gram(dataset, view)
    try:
        arrays = score_arrays(h, view.signs, indices=view.indices, ridge=config.ridge)
    except NotPositiveDefinite as exc:
        raise RunFailure(int(class_c), run_index, exc) from exc
    keep = view.signs > 0
    return view.indices[keep], {f: getattr(arrays, f)[keep] for f in AVERAGED_FIELDS}


class _Neumaier:
    """Elementwise compensated summation of equal-length arrays."""

    def __init__(self, size: int):
        self.total = np.zeros(size)
        self.comp = np.zeros(size)

    def add(self, x: np.ndarray) -> None:
        t = self.total + x
        big = np.abs(self.total) >= np.abs(x)
        self.comp += np.where(big, (self.total - t) + x, (x - t) + self.total)
        self.total = t

    def value(self) -> np.ndarray:
        return self.total + self.comp


def _reduce_runs(results: list[tuple[np.ndarray, dict]]) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    positives = results[0][0]
    acc = {f: _Neumaier(positives.size) for f in AVERAGED_FIELDS}
    for idx, vals in results:
        if not np.array_equal(idx, positives):
            raise AssertionError("positive set changed between runs")
        for f in AVERAGED_FIELDS:
            acc[f].add(vals[f])
    n_runs = len(results)
    return positives, {f: acc[f].value() / n_runs for f in AVERAGED_FIELDS}


def score_class(dataset: Dataset, class_c: int, config: StochasticConfig, threads: int = 1):
    """Mean scores of the members of ``class_c`` over ``config.runs`` runs.

    Returns ``(indices, {field: mean array})``; a failing run aborts the class.
    """
    jobs = range(config.runs)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _run_once(dataset, class_c, config, r), jobs))
    else:
        results = [_run_once(dataset, class_c, config, r) for r in jobs]
    return _reduce_runs(results)


@dataclass(frozen=True, eq=False)
class ScoreTable:
    """Per-instance averaged scores covering a whole dataset."""

    labels: np.ndarray
    runs_used: np.ndarray
    columns: dict
    fingerprint: str = ""
    config: StochasticConfig | None = None

    @property
    def n(self) -> int:
        return self.labels.size

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def sidecar(self) -> dict:
        if self.config is None:
            raise ValueError("score table has no configuration attached")
        return {
            "seed": self.config.seed,
            "neg_ratio": self.config.neg_ratio,
            "runs": self.config.runs,
            "ridge": self.config.ridge,
            "fingerprint": self.fingerprint,
        }


def score_all(dataset: Dataset, config: StochasticConfig, threads: int = 1) -> ScoreTable:
    """Score every instance by running :func:`score_class` for each class.

    ``threads`` bounds the number of (class, run) jobs in flight. BLAS is
    pinned to one thread for the duration so results are bit-identical for
    every ``threads`` value; reduction is sequential in (class, run) order.
    """
    classes = [int(c) for c in dataset.classes]
    if len(classes) < 2:
        raise ValueError("score_all needs at least 2 classes")
    jobs = [(c, r) for c in classes for r in range(config.runs)]

    def work(job):
        c, r = job
        return _run_once(dataset, c, config, r)

    with threadpool_limits(limits=1, user_api="blas"):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                flat = list(pool.map(work, jobs))
        else:
            flat = [work(j) for j in jobs]

    n = dataset.n
    columns = {f: np.full(n, np.nan) for f in AVERAGED_FIELDS}
    runs_used = np.zeros(n, dtype=np.int64)
    for k, c in enumerate(classes):
        chunk = flat[k * config.runs : (k + 1) * config.runs]
        idx, means = _reduce_runs(chunk)
        if np.any(runs_used[idx]):
            raise AssertionError(f"instances of class {c} scored twice")
        for f in AVERAGED_FIELDS:
            columns[f][idx] = means[f]
        runs_used[idx] = len(chunk)
    if np.any(runs_used != config.runs):
        raise AssertionError("score table does not cover every instance")
    return ScoreTable(dataset.labels.copy(), runs_used, columns, dataset_fingerprint(dataset), config)


def write_score_csv(table: ScoreTable, path, sidecar: bool = True) -> None:
    """Write ``index,label,cg,...,v_norm`` rows (17 significant digits).

    With ``sidecar`` the run configuration goes to ``<path>.json`` next to it.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(("index", "label") + SCORE_CSV_COLUMNS) + "\n")
        cols = [table[c] for c in SCORE_CSV_COLUMNS]
        for i in range(table.n):
            vals = ",".join("%.17g" % col[i] for col in cols)
            fh.write(f"{i},{int(table.labels[i])},{vals}\n")
    if sidecar:
        sidecar_path(path).write_text(json.dumps(table.sidecar(), indent=2, sort_keys=True) + "\n")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def read_score_csv(path) -> ScoreTable:
    """Read a score CSV; missing columns other than ``index``/``label``/``cg`` are allowed."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"index", "label", "cg"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: score CSV needs index, label and cg columns")
        present = [c for c in SCORE_CSV_COLUMNS if c in reader.fieldnames]
        rows = list(reader)
    index = np.array([int(r["index"]) for r in rows], dtype=np.int64)
    if not np.array_equal(index, np.arange(index.size)):
        raise ValueError(f"{path}: index column must be 0..n-1 in order")
    labels = np.array([int(r["label"]) for r in rows], dtype=np.int64)
    columns = {c: np.array([float(r[c]) for r in rows]) for c in present}
    config, fingerprint = None, ""
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
        config = StochasticConfig(meta["neg_ratio"], meta["runs"], meta["seed"], meta.get("ridge"))
        fingerprint = meta.get("fingerprint", "")
    runs = np.full(index.size, config.runs if config else 0, dtype=np.int64)
    return ScoreTable(labels, runs, columns, fingerprint, config)
