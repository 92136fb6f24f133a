"""ReLU arc-cosine Gram matrix on unit-norm inputs.

For unit vectors with cosine ``rho`` the infinite-width two-layer ReLU
kernel is ``rho * (pi - arccos(rho)) / (2 pi)``. Its diagonal is 1/2 and
every entry lies in ``[-1/2, 1/2]``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cgscore.dataset import Dataset

__all__ = ["BinaryView", "GramMatrix", "KernelError", "gram", "gram_from_features", "load_gram", "relu_kernel", "save_gram"]

CLAMP_TOL = 1e-9
CGH1_MAGIC = b"CGH1"


class KernelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BinaryView:
    """Rows ``indices`` of a dataset relabeled with signs in {-1, +1}."""

    indices: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        sgn = np.asarray(self.signs, dtype=np.float64)
        if idx.ndim != 1 or sgn.shape != idx.shape:
            raise KernelError("indices and signs must be 1-d arrays of equal length")
        if np.unique(idx).size != idx.size:
            raise KernelError("view indices must be distinct")
        if not np.all((sgn == 1.0) | (sgn == -1.0)):
            raise KernelError("signs must be exactly +1 or -1")
        if not (np.any(sgn > 0) and np.any(sgn < 0)):
            raise KernelError("view must contain both signs")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "signs", sgn)

    @property
    def size(self) -> int:
        return self.indices.size


@dataclass(frozen=True, eq=False)
class GramMatrix:
    entries: np.ndarray

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def _clamp(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.float64)
    if not np.all(np.isfinite(rho)):
        raise KernelError("cosine similarity is not finite")
    excess = np.abs(rho) - 1.0
    if np.any(excess > CLAMP_TOL):
        worst = float(np.max(np.abs(rho)))
        raise KernelError(f"cosine similarity {worst!r} outside [-1, 1]; inputs are not unit norm")
    return np.clip(rho, -1.0, 1.0)


def relu_kernel(rho):
    """Kernel value for cosine similarity ``rho`` (scalar or array)."""
    r = _clamp(rho)
    out = r * (np.pi - np.arccos(r)) / (2.0 * np.pi)
    return float(out) if out.ndim == 0 else out


def gram_from_features(x: np.ndarray) -> np.ndarray:
    """Dense Gram matrix for unit-norm rows ``x``.

    The upper triangle is computed and mirrored so the result is exactly
    symmetric; the diagonal is pinned to 1/2 since ``<x, x> = 1``.
    """
    x = np.asarray(x, dtype=np.float64)
    rho = x @ x.T
    iu = np.triu_indices(rho.shape[0], k=1)
    upper = relu_kernel(rho[iu]) if iu[0].size else np.empty(0)
    h = np.empty_like(rho)
    h[iu] = upper
    h[iu[1], iu[0]] = upper
    np.fill_diagonal(h, 0.5)
    return h


def gram(dataset: Dataset, view: BinaryView) -> GramMatrix:
    idx = view.indices
    if idx.size < 2:
        raise KernelError(f"need at least 2 instances, got {idx.size}")
    if idx.min() < 0 or idx.max() >= dataset.n:
        raise KernelError(f"view index out of range for dataset of size {dataset.n}")
    return GramMatrix(gram_from_features(dataset.features[idx]))


def save_gram(h, path) -> None:
    """Debug dump: ``CGH1``, u32 m, then m*m float64 little endian."""
    a = np.ascontiguousarray(np.asarray(h), dtype="<f8")
    Path(path).write_bytes(CGH1_MAGIC + struct.pack("<I", a.shape[0]) + a.tobytes())


def load_gram(path) -> GramMatrix:
    buf = Path(path).read_bytes()
    if len(buf) < 8 or buf[:4] != CGH1_MAGIC:
        raise KernelError(f"{path}: not a CGH1 file")
    (m,) = struct.unpack_from("<I", buf, 4)
    if len(buf) != 8 + 8 * m * m:
        raise KernelError(f"{path}: payload size does not match m={m}")
    return GramMatrix(np.frombuffer(buf, dtype="<f8", offset=8).reshape(m, m).copy())
