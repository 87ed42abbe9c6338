import numpy as np
import pytest

from unilasso import Dataset, Family, FitConfig

# Tolerance tight enough that KKT residuals land below 1e-6.
TIGHT = FitConfig(tol=1e-14)


def gaussian_dataset(seed: int, n: int = 60, p: int = 8, k: int = 3, noise: float = 0.5) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:k] = rng.standard_normal(k) + np.sign(rng.standard_normal(k))
    y = X @ beta + noise * rng.standard_normal(n)
    return Dataset(X, y)


def binomial_dataset(seed: int, n: int = 80, p: int = 4) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    eta = 1.2 * X[:, 0] - 0.8 * X[:, 1]
    prob = 1.0 / (1.0 + np.exp(-eta))
    y = (rng.uniform(size=n) < prob).astype(float)
    if y.min() == y.max():  # keep both classes present
        y[0] = 1.0 - y[0]
    return Dataset(X, y, family=Family.BINOMIAL)


@pytest.fixture
def small_gaussian() -> Dataset:
    return gaussian_dataset(0)


@pytest.fixture
def small_binomial() -> Dataset:
    return binomial_dataset(1)
