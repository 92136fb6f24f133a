import numpy as np
import pytest

from cgscore.dataset import normalize_rows
from cgscore.kernel import gram_from_features

# Hand-inverted 2x2 Gram of two unit vectors with cosine 1/2:
# H = [[1/2, 1/6], [1/6, 1/2]], det = 2/9, H^-1 = [[9/4, -3/4], [-3/4, 9/4]].
H2 = np.array([[0.5, 1 / 6], [1 / 6, 0.5]])
H2_INV = np.array([[9 / 4, -3 / 4], [-3 / 4, 9 / 4]])


def random_problem(rng, n, d):
    x = normalize_rows(rng.standard_normal((n, d)))
    y = rng.choice([-1.0, 1.0], size=n)
    if np.all(y == y[0]):
        y[0] = -y[0]
    return x, gram_from_features(x), y


def oracle_corpus(count=50, seed=2024, n_range=(5, 200), d_range=(3, 50)):
    """Random unit-row problems used by the oracle-equivalence checks."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        d = int(rng.integers(d_range[0], d_range[1] + 1))
        yield random_problem(rng, n, d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
