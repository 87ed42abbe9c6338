"""Scenario generators and evaluation metrics for the benchmark harness.

All generators are deterministic given (seed, parameters) and calibrate the
noise SD from the realized Var(X beta) of the training draw, so the stated
signal-to-noise ratio holds exactly on that draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import Dataset, Family, FitConfig
from .pipeline import CollapsedModel, lasso_cv, predict, predict_proba

__all__ = [
    "Metrics",
    "SNR_LEVELS",
    "SCENARIO_NAMES",
    "gen_snr_scenario",
    "gen_homecourt",
    "gen_two_class",
    "gen_counter_example",
    "gen_external_scenario",
    "evaluate",
    "stability",
    "matching_lasso",
]

SNR_LEVELS = {"low": 0.5, "medium": 1.0, "high": 3.0}
SCENARIO_NAMES = ("low_snr", "medium_snr", "high_snr", "homecourt", "two_class", "counter_example")
DEFAULT_N_TEST = 10_000


@dataclass(frozen=True)
class Metrics:
    test_mse: float  # misclassification rate for binomial models
    support: int
    tpr: float | None = None
    fpr: float | None = None


def _equicorrelated(rng: np.random.Generator, n: int, p: int, rho: float = 0.5) -> np.ndarray:
    shared = rng.standard_normal((n, 1))
    return np.sqrt(rho) * shared + np.sqrt(1.0 - rho) * rng.standard_normal((n, p))


def _ar1(rng: np.random.Generator, n: int, p: int, rho: float) -> np.ndarray:
    X = np.empty((n, p))
    X[:, 0] = rng.standard_normal(n)
    scale = np.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + scale * rng.standard_normal(n)
    return X


def _noise_sd(X: np.ndarray, beta: np.ndarray, snr: float) -> float:
    signal_var = float(np.var(X @ beta))
    return np.sqrt(signal_var / snr) if signal_var > 0 else 1.0


def gen_snr_scenario(
    n: int, p: int, level: str, seed: int, n_test: int = DEFAULT_N_TEST
) -> tuple[Dataset, Dataset, np.ndarray]:
    """Equicorrelated (rho=0.5) gaussian features, 10% support, N(0,1)
    nonzero coefficients, noise calibrated to the level's SNR band."""
    if level not in SNR_LEVELS:
        raise ValueError(f"level must be one of {sorted(SNR_LEVELS)}")
    rng = np.random.default_rng(seed)
    k = max(1, round(0.1 * p))
    beta = np.zeros(p)
    support = rng.choice(p, size=k, replace=False)
    beta[support] = rng.standard_normal(k)
    X = _equicorrelated(rng, n, p)
    sigma = _noise_sd(X, beta, SNR_LEVELS[level])
    y = X @ beta + sigma * rng.standard_normal(n)
    Xt = _equicorrelated(rng, n_test, p)
    yt = Xt @ beta + sigma * rng.standard_normal(n_test)
    return Dataset(X, y), Dataset(Xt, yt), beta


def gen_homecourt(
    n: int = 100, p: int = 30, rho: float = 0.8, sparsity: float = 0.2,
    seed: int = 0, n_test: int = DEFAULT_N_TEST,
) -> tuple[Dataset, Dataset, np.ndarray]:
    """Two-stage generation favoring the two-stage estimator.

    Stage one draws y' = X beta + noise (SNR 1, non-negative beta), stage two
    replaces beta_j with betahat_j^uni * beta_j where betahat^uni are the
    univariate slopes fit on (X, y').  The returned effective_beta carries
    the stage-two coefficients; its support is the support of beta.
    """
    rng = np.random.default_rng(seed)
    k = max(1, round(sparsity * p))
    beta = np.zeros(p)
    support = rng.choice(p, size=k, replace=False)
    beta[support] = np.abs(rng.standard_normal(k))
    X = _ar1(rng, n, p, rho)
    sigma1 = _noise_sd(X, beta, 1.0)
    y1 = X @ beta + sigma1 * rng.standard_normal(n)
    Xc = X - X.mean(axis=0)
    beta_uni = (Xc * (y1 - y1.mean())[:, None]).sum(axis=0) / (Xc * Xc).sum(axis=0)
    effective = beta_uni * beta
    sigma2 = _noise_sd(X, effective, 1.0)
    y = X @ effective + sigma2 * rng.standard_normal(n)
    Xt = _ar1(rng, n_test, p, rho)
    yt = Xt @ effective + sigma2 * rng.standard_normal(n_test)
    return Dataset(X, y), Dataset(Xt, yt), effective


def gen_two_class(
    n: int = 200, p: int = 500, seed: int = 0, n_test: int = DEFAULT_N_TEST
) -> tuple[Dataset, Dataset, np.ndarray]:
    """Balanced binary classes, AR(1) rho=0.8 features within class, the
    first 20 features shifted by 0.5 in the positive class."""
    rng = np.random.default_rng(seed)
    shift_count = min(20, p)

    def draw(m):
        y = np.zeros(m)
        y[m // 2 :] = 1.0
        X = _ar1(rng, m, p, 0.8)
        X[y == 1.0, :shift_count] += 0.5
        perm = rng.permutation(m)
        return Dataset(X[perm], y[perm], family=Family.BINOMIAL)

    train, test = draw(n), draw(n_test)
    marker = np.zeros(p)
    marker[:shift_count] = 1.0
    return train, test, marker


def gen_counter_example(
    n: int = 100, seed: int = 0, n_test: int = DEFAULT_N_TEST
) -> tuple[Dataset, Dataset, np.ndarray]:
    """x2 = x1 + noise with beta = (1, -0.5, 0...): the univariate and
    multivariate signs of x2 disagree in sample, defeating sign constraints."""
    rng = np.random.default_rng(seed)
    p = 20
    beta = np.zeros(p)
    beta[0], beta[1] = 1.0, -0.5

    def draw(m):
        X = rng.standard_normal((m, p))
        X[:, 1] = X[:, 0] + rng.standard_normal(m)
        y = X @ beta + 0.5 * rng.standard_normal(m)
        return Dataset(X, y)

    return draw(n), draw(n_test), beta


def gen_external_scenario(
    n: int = 300, p: int = 1000, m_external: int = 600, seed: int = 0,
    snr: float = 1.5, n_test: int = DEFAULT_N_TEST,
) -> tuple[Dataset, Dataset, Dataset, np.ndarray]:
    """Training set plus an external cohort from the same distribution.

    AR(1) rho=0.8 features; U(0.5, 2) coefficients on every other feature
    among the first 100.  Returns (train, external, test, beta).
    """
    rng = np.random.default_rng(seed)
    beta = np.zeros(p)
    idx = np.arange(0, min(100, p), 2)
    beta[idx] = rng.uniform(0.5, 2.0, size=len(idx))
    X = _ar1(rng, n, p, 0.8)
    sigma = _noise_sd(X, beta, snr)

    def draw(m):
        Xd = _ar1(rng, m, p, 0.8)
        return Dataset(Xd, Xd @ beta + sigma * rng.standard_normal(m))

    train = Dataset(X, X @ beta + sigma * rng.standard_normal(n))
    return train, draw(m_external), draw(n_test), beta


def evaluate(model: CollapsedModel, test: Dataset, true_beta: np.ndarray | None = None) -> Metrics:
    """Test loss, support size, and TPR/FPR against a generating support."""
    if model.family == Family.BINOMIAL:
        pred = predict_proba(model, test.features) >= 0.5
        loss = float(np.mean(pred != (test.response == 1.0)))
    else:
        resid = test.response - predict(model, test.features)
        loss = float(np.mean(resid * resid))
    chosen = model.gammas != 0.0
    tpr = fpr = None
    if true_beta is not None:
        true = np.asarray(true_beta) != 0.0
        pos, neg = int(true.sum()), int((~true).sum())
        tpr = float((chosen & true).sum() / pos) if pos else 1.0
        fpr = float((chosen & ~true).sum() / neg) if neg else 0.0
    return Metrics(test_mse=loss, support=int(chosen.sum()), tpr=tpr, fpr=fpr)


def stability(models: list[CollapsedModel]) -> float:
    """Mean pairwise Jaccard index of supports; two empty supports count 1."""
    if len(models) < 2:
        raise ValueError("stability needs at least two models")
    supports = [set(np.flatnonzero(m.gammas).tolist()) for m in models]
    vals = []
    for i in range(len(supports)):
        for j in range(i + 1, len(supports)):
            union = supports[i] | supports[j]
            vals.append(len(supports[i] & supports[j]) / len(union) if union else 1.0)
    return float(np.mean(vals))


def matching_lasso(dataset: Dataset, target_support: int, config: FitConfig | None = None) -> CollapsedModel:
    """Plain lasso with lambda grown from the CV optimum until the support
    size drops to the target (support is 0 at the path start, so this always
    terminates)."""
    if target_support < 0:
        raise ValueError("target_support must be >= 0")
    config = config or FitConfig()
    model, cv, path = lasso_cv(dataset, config)
    k = cv.idx_min
    while k > 0 and path.n_active[k] > target_support:
        k -= 1
    return CollapsedModel(
        gamma0=float(path.intercepts[k]),
        gammas=path.coefs[k].copy(),
        thetas=path.coefs[k].copy(),
        univariate=None,
        lambda_selected=float(path.lambdas[k]),
        family=dataset.family,
        variant_tag="lasso",
        feature_names=dataset.feature_names,
    )
