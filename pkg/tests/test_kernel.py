import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgscore.dataset import Dataset, normalize_rows
from cgscore.kernel import BinaryView, KernelError, gram, gram_from_features, load_gram, relu_kernel, save_gram


@pytest.mark.parametrize("rho, expected", [(1.0, 0.5), (0.0, 0.0), (-1.0, 0.0), (0.5, 1 / 6)])
def test_closed_form_values(rho, expected):
    assert relu_kernel(rho) == pytest.approx(expected, abs=1e-15)


def test_clamps_roundoff():
    assert relu_kernel(1 + 5e-10) == 0.5
    assert relu_kernel(-1 - 5e-10) == 0.0


def test_rejects_large_excursion():
    with pytest.raises(KernelError):
        relu_kernel(1.01)
    with pytest.raises(KernelError):
        relu_kernel(float("nan"))


@pytest.mark.parametrize("rho", [-0.9, -0.3, 0.2, 0.7])
def test_matches_monte_carlo_expectation(rho):
    # E_w[x.y 1{w.x >= 0, w.y >= 0}] with w ~ N(0, I) in the plane of x, y
    rng = np.random.default_rng(7)
    x = np.array([1.0, 0.0])
    y = np.array([rho, math.sqrt(1 - rho**2)])
    w = rng.standard_normal((400_000, 2))
    p = np.mean((w @ x >= 0) & (w @ y >= 0))
    se = math.sqrt(p * (1 - p) / w.shape[0])
    assert abs(relu_kernel(rho) - rho * p) <= 4 * abs(rho) * se


def test_orthogonal_pair():
    np.testing.assert_array_equal(gram_from_features(np.eye(2)), [[0.5, 0.0], [0.0, 0.5]])


def test_identical_pair():
    x = np.array([[0.6, 0.8], [0.6, 0.8]])
    np.testing.assert_allclose(gram_from_features(x), np.full((2, 2), 0.5), atol=1e-12)


def test_equiangular_triple():
    # three unit vectors with pairwise inner product 1/2
    x = normalize_rows(np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]))
    h = gram_from_features(x)
    np.testing.assert_allclose(h, np.where(np.eye(3, dtype=bool), 0.5, 1 / 6), atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_invariants(n, d, seed):
    rng = np.random.default_rng(seed)
    h = gram_from_features(normalize_rows(rng.standard_normal((n, d)) + 1e-3))
    assert np.array_equal(h, h.T)
    assert np.all(np.abs(np.diagonal(h) - 0.5) <= 1e-12)
    assert np.all(np.abs(h) <= 0.5)


def test_permutation_equivariance(rng):
    x = normalize_rows(rng.standard_normal((12, 5)))
    ds = Dataset(x, np.arange(12) % 2)
    idx = np.arange(12)
    perm = rng.permutation(12)
    signs = np.where(idx % 2 == 0, 1.0, -1.0)
    h = gram(ds, BinaryView(idx, signs)).entries
    hp = gram(ds, BinaryView(idx[perm], signs[perm])).entries
    # BLAS may sum in a different order, so equality holds to roundoff
    np.testing.assert_allclose(hp, h[np.ix_(perm, perm)], rtol=0, atol=1e-15)


def test_view_validation():
    with pytest.raises(KernelError, match="distinct"):
        BinaryView([0, 0], [1, -1])
    with pytest.raises(KernelError, match="both signs"):
        BinaryView([0, 1], [1, 1])
    with pytest.raises(KernelError, match="exactly"):
        BinaryView([0, 1], [1, -0.5])


def test_gram_errors():
    ds = Dataset(np.eye(3), [0, 1, 0])
    with pytest.raises(KernelError, match="out of range"):
        gram(ds, BinaryView([0, 5], [1, -1]))


def test_dump_round_trip(tmp_path, rng):
    h = gram_from_features(normalize_rows(rng.standard_normal((6, 3))))
    save_gram(h, tmp_path / "h.cgh1")
    raw = (tmp_path / "h.cgh1").read_bytes()
    assert raw[:4] == b"CGH1" and len(raw) == 8 + 8 * 36
    np.testing.assert_array_equal(load_gram(tmp_path / "h.cgh1").entries, h)
