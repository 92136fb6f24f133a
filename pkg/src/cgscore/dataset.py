"""Labeled datasets: ingestion, synthesis, label corruption and on-disk formats.

Every :class:`Dataset` holds unit-norm rows. Normalization happens when a
dataset is constructed from raw numbers, so downstream kernel code can rely
on ``<x, x> == 1``.

Two on-disk formats are supported:

* CSV with header ``f0,...,f{d-1},label``; floats are written with 17
  significant digits.
* CGM1 binary: ASCII magic ``CGM1``, ``u32`` n, ``u32`` d (little endian),
  ``n*d`` float32 features row-major, then ``n`` int32 labels.
"""

from __future__ import annotations

import csv
import hashlib
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cgscore.rng import make_rng

__all__ = [
    "Dataset",
    "DatasetError",
    "FormatError",
    "NoiseMask",
    "dataset_fingerprint",
    "dataset_to_cgm1_bytes",
    "inject_label_noise",
    "load_binary",
    "load_csv",
    "load_dataset",
    "normalize_rows",
    "save_binary",
    "save_csv",
    "load_mask_csv",
    "save_mask_csv",
    "synth_gaussian",
    "synth_gaussian_multiclass",
]

CGM1_MAGIC = b"CGM1"
UNIT_NORM_TOL = 1e-9
MIN_ROW_NORM = 1e-12
FLOAT_FMT = "%.17g"
# u32 header fields cap n and d; the element count must also stay addressable.
MAX_ELEMENTS = 2**32 - 1


class DatasetError(ValueError):
    """Invalid dataset contents or parameters."""


class FormatError(DatasetError):
    """A file does not follow the expected on-disk layout."""


def normalize_rows(matrix) -> np.ndarray:
    """Scale every row of ``matrix`` to unit L2 norm.

    Raises :class:`DatasetError` if a row has norm ``<= 1e-12``.
    """
    m = np.array(matrix, dtype=np.float64, copy=True)
    if m.ndim != 2:
        raise DatasetError(f"expected a 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DatasetError("matrix contains non-finite values")
    norms = np.linalg.norm(m, axis=1)
    bad = np.flatnonzero(norms <= MIN_ROW_NORM)
    if bad.size:
        raise DatasetError(f"row {int(bad[0])} has zero or near-zero norm ({norms[bad[0]]:.3g})")
    m /= norms[:, None]
    return m


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if x.ndim != 2:
            raise DatasetError(f"features must be 2-d, got shape {x.shape}")
        n, d = x.shape
        if n < 2 or d < 1:
            raise DatasetError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
        if y.shape != (n,):
            raise DatasetError(f"labels shape {y.shape} does not match n={n}")
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise DatasetError("labels must be integers")
        y = y.astype(np.int64)
        if np.any(y < 0):
            raise DatasetError("labels must be non-negative")
        if not np.all(np.isfinite(x)):
            raise DatasetError("features contain non-finite values")
        dev = np.abs(np.linalg.norm(x, axis=1) - 1.0)
        if np.any(dev > UNIT_NORM_TOL):
            i = int(np.argmax(dev))
            raise DatasetError(f"row {i} is not unit norm (|norm-1| = {dev[i]:.3g})")
        x = x.copy()
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @classmethod
    def from_raw(cls, features, labels) -> "Dataset":
        """Build a dataset from arbitrary (non-normalized) rows."""
        return cls(normalize_rows(features), np.asarray(labels))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.features, np.asarray(labels))


@dataclass(frozen=True, eq=False)
class NoiseMask:
    flipped: np.ndarray
    original_labels: np.ndarray

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.flipped))

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.flipped)


# ---------------------------------------------------------------- CSV


def load_csv(path) -> Dataset:
    """Read a ``f0,...,label`` CSV file; rows are L2-normalized on ingestion."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        n_label = header.count("label")
        if n_label == 0:
            raise FormatError(f"{path}: missing 'label' column")
        if n_label > 1:
            raise FormatError(f"{path}: duplicate 'label' column")
        label_col = header.index("label")
        feat_cols = [j for j in range(len(header)) if j != label_col]
        if not feat_cols:
            raise FormatError(f"{path}: no feature columns")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(row[j]) for j in feat_cols]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DatasetError(f"{path}:{lineno}: non-finite feature value")
            raw = row[label_col].strip()
            try:
                lab = int(raw)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: label {raw!r} is not an integer") from None
            if lab < 0:
                raise DatasetError(f"{path}:{lineno}: negative label {lab}")
            rows.append(vals)
            labels.append(lab)
    if len(rows) < 2:
        raise DatasetError(f"{path}: need at least 2 rows, got {len(rows)}")
    try:
        return Dataset.from_raw(np.array(rows, dtype=np.float64), np.array(labels, dtype=np.int64))
    except DatasetError as exc:
        raise DatasetError(f"{path}: {exc}") from None


def save_csv(dataset: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join([f"f{j}" for j in range(dataset.d)] + ["label"]) + "\n")
        for row, lab in zip(dataset.features, dataset.labels):
            fh.write(",".join(FLOAT_FMT % v for v in row) + f",{int(lab)}\n")


# ---------------------------------------------------------------- CGM1


def dataset_to_cgm1_bytes(dataset: Dataset) -> bytes:
    header = CGM1_MAGIC + struct.pack("<II", dataset.n, dataset.d)
    feats = np.ascontiguousarray(dataset.features, dtype="<f4").tobytes()
    labels = np.ascontiguousarray(dataset.labels, dtype="<i4").tobytes()
    return header + feats + labels


def save_binary(dataset: Dataset, path) -> None:
    """Write ``dataset`` in CGM1 format (features stored as float32)."""
    if dataset.labels.max() > np.iinfo(np.int32).max:
        raise DatasetError("labels do not fit in int32")
    Path(path).write_bytes(dataset_to_cgm1_bytes(dataset))


def load_binary(path) -> Dataset:
    """Read a CGM1 file.

    The float32 payload is widened to float64 and re-normalized so the
    unit-norm invariant holds at float64 precision.
    """
    buf = Path(path).read_bytes()
    if len(buf) < 12:
        raise FormatError(f"{path}: file too short for CGM1 header")
    if buf[:4] != CGM1_MAGIC:
        raise FormatError(f"{path}: bad magic {buf[:4]!r}, expected {CGM1_MAGIC!r}")
    n, d = struct.unpack_from("<II", buf, 4)
    if n * d > MAX_ELEMENTS:
        raise FormatError(f"{path}: dimension overflow (n={n}, d={d})")
    expected = 12 + 4 * n * d + 4 * n
    if len(buf) < expected:
        raise FormatError(f"{path}: truncated payload ({len(buf)} bytes, header implies {expected})")
    if len(buf) > expected:
        raise FormatError(f"{path}: {len(buf) - expected} trailing bytes after payload")
    feats = np.frombuffer(buf, dtype="<f4", count=n * d, offset=12).reshape(n, d)
    labels = np.frombuffer(buf, dtype="<i4", count=n, offset=12 + 4 * n * d)
    return Dataset.from_raw(feats.astype(np.float64), labels.astype(np.int64))


def load_dataset(path, fmt: str | None = None) -> Dataset:
    """Dispatch on ``fmt`` (``"csv"`` or ``"cgm1"``), or on the file suffix."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "cgm1"
    if fmt == "csv":
        return load_csv(path)
    if fmt == "cgm1":
        return load_binary(path)
    raise ValueError(f"unknown dataset format {fmt!r}")


def dataset_fingerprint(dataset: Dataset) -> str:
    """SHA-256 hex digest of the dataset's CGM1 serialization."""
    return hashlib.sha256(dataset_to_cgm1_bytes(dataset)).hexdigest()


# ---------------------------------------------------------------- synthesis


def synth_gaussian(
    n_per_class: int = 1000,
    d: int = 3000,
    mean_offset: float = 1.0,
    variance: float = 0.25,
    seed: int = 0,
    return_raw: bool = False,
):
    """Two isotropic Gaussian classes separated along the first axis.

    Class 0 is drawn from N(+mean_offset * e_0, variance * I), class 1 from
    N(-mean_offset * e_0, variance * I). Rows are then normalized.

    With ``return_raw=True`` the pre-normalization matrix is returned as a
    second value (useful for inspecting the first coordinate).
    """
    if n_per_class < 1 or d < 1:
        raise DatasetError(f"need n_per_class >= 1 and d >= 1, got {n_per_class}, {d}")
    if not (variance > 0 and math.isfinite(variance)):
        raise DatasetError(f"variance must be positive, got {variance}")
    rng = make_rng(seed)
    raw = rng.standard_normal((2 * n_per_class, d)) * math.sqrt(variance)
    raw[:n_per_class, 0] += mean_offset
    raw[n_per_class:, 0] -= mean_offset
    labels = np.repeat(np.array([0, 1], dtype=np.int64), n_per_class)
    ds = Dataset.from_raw(raw, labels)
    if return_raw:
        return ds, raw
    return ds


def synth_gaussian_multiclass(
    n_classes: int,
    n_per_class: int,
    d: int,
    mean_offset: float = 1.0,
    variance: float = 0.25,
    seed: int = 0,
) -> Dataset:
    """k isotropic Gaussian classes; class c is centred at ``mean_offset * e_c``."""
    if n_classes < 2 or n_per_class < 1 or d < n_classes:
        raise DatasetError("need n_classes >= 2, n_per_class >= 1 and d >= n_classes")
    if not (variance > 0 and math.isfinite(variance)):
        raise DatasetError(f"variance must be positive, got {variance}")
    rng = make_rng(seed)
    n = n_classes * n_per_class
    raw = rng.standard_normal((n, d)) * math.sqrt(variance)
    labels = np.repeat(np.arange(n_classes, dtype=np.int64), n_per_class)
    raw[np.arange(n), labels] += mean_offset
    return Dataset.from_raw(raw, labels)


def inject_label_noise(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, NoiseMask]:
    """Flip exactly ``round(fraction * n)`` labels to a different class.

    Victims are chosen uniformly without replacement; each new label is drawn
    uniformly from the classes other than the original one.
    """
    if not 0.0 <= fraction <= 1.0:
        raise DatasetError(f"fraction must lie in [0, 1], got {fraction}")
    n = dataset.n
    count = int(round(fraction * n))
    original = dataset.labels.copy()
    classes = dataset.classes
    flipped = np.zeros(n, dtype=bool)
    if count == 0:
        return dataset, NoiseMask(flipped, original)
    if classes.size < 2:
        raise DatasetError("cannot inject label noise into a single-class dataset")
    rng = make_rng(seed)
    victims = np.sort(rng.choice(n, size=count, replace=False))
    new_labels = original.copy()
    # offset in [1, k-1] lands on a uniformly random other class
    offsets = rng.integers(1, classes.size, size=count)
    pos = np.searchsorted(classes, original[victims])
    new_labels[victims] = classes[(pos + offsets) % classes.size]
    flipped[victims] = True
    return dataset.with_labels(new_labels), NoiseMask(flipped, original)


def save_mask_csv(mask: NoiseMask, labels, path) -> None:
    """One row per instance: ``index,original_label,label,flipped`` (flipped is 0/1)."""
    labels = np.asarray(labels)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write("index,original_label,label,flipped\n")
        for i, (orig, lab, f) in enumerate(zip(mask.original_labels, labels, mask.flipped)):
            fh.write(f"{i},{int(orig)},{int(lab)},{int(bool(f))}\n")


def load_mask_csv(path) -> NoiseMask:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"index", "original_label", "flipped"} <= set(reader.fieldnames):
            raise FormatError(f"{path}: mask CSV needs index, original_label and flipped columns")
        rows = list(reader)
    index = np.array([int(r["index"]) for r in rows], dtype=np.int64)
    if not np.array_equal(index, np.arange(index.size)):
        raise FormatError(f"{path}: index column must be 0..n-1 in order")
    flipped = np.array([r["flipped"].strip() not in ("0", "false", "False", "") for r in rows], dtype=bool)
    original = np.array([int(r["original_label"]) for r in rows], dtype=np.int64)
    return NoiseMask(flipped, original)
