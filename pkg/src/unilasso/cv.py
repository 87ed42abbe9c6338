"""K-fold cross-validation over the stage-2 lambda path.

The lambda grid is computed once on the full problem and reused in every
fold so the curves line up.  Fold means are averaged (and their spread gives
the standard error), which makes leave-one-out CV on a gaussian problem
exactly the mean squared LOO residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import Family, FitConfig
from .solver import PathSolution, SolverProblem, fit_path, lambda_grid

__all__ = ["CvResult", "kfold_cv", "cv_error_at_selected", "fold_ids"]

PROB_CLAMP = 1e-5


@dataclass(frozen=True)
class CvResult:
    lambdas: np.ndarray
    cv_mean: np.ndarray  # per-lambda mean held-out loss (deviance for binomial)
    cv_se: np.ndarray
    idx_min: int
    idx_1se: int
    fold_assignment: np.ndarray
    cv_misclass_mean: np.ndarray | None = None  # binomial only
    cv_misclass_se: np.ndarray | None = None

    @property
    def lambda_min(self) -> float:
        return float(self.lambdas[self.idx_min])

    @property
    def lambda_1se(self) -> float:
        return float(self.lambdas[self.idx_1se])


def fold_ids(n: int, n_folds: int, seed: int) -> np.ndarray:
    """Balanced fold assignment from a seeded shuffle."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    ids = np.empty(n, dtype=np.int64)
    ids[perm] = np.arange(n) % n_folds
    return ids


def _held_out_losses(problem: SolverProblem, path: PathSolution, rows: np.ndarray):
    """Per-lambda mean loss (and misclassification rate) on held-out rows."""
    D = problem.design[rows]
    y = problem.target[rows]
    off = problem.offset[rows]
    eta = off[:, None] + path.intercepts[None, :] + D @ path.coefs.T  # n_held x L
    if problem.family == Family.BINOMIAL:
        prob = 1.0 / (1.0 + np.exp(-eta))
        np.clip(prob, PROB_CLAMP, 1.0 - PROB_CLAMP, out=prob)
        dev = -2.0 * (y[:, None] * np.log(prob) + (1 - y[:, None]) * np.log(1 - prob))
        mis = (prob >= 0.5) != (y[:, None] == 1.0)
        return dev.mean(axis=0), mis.mean(axis=0)
    sq = (y[:, None] - eta) ** 2
    return sq.mean(axis=0), None


def kfold_cv(
    problem: SolverProblem,
    config: FitConfig,
    lambdas: np.ndarray | None = None,
) -> CvResult:
    """Cross-validate fit_path over a shared lambda grid.

    Stage-1 features arriving in problem.design are taken as given: they are
    not refit per fold here (the strict variant lives in the pipeline).
    """
    n = problem.n
    K = config.n_folds
    if n < K:
        raise ValueError(f"n={n} is smaller than n_folds={K}")
    lams = lambda_grid(problem, config) if lambdas is None else np.asarray(lambdas, dtype=np.float64)
    ids = fold_ids(n, K, config.seed)
    L = len(lams)
    fold_loss = np.empty((K, L))
    fold_mis = np.empty((K, L)) if problem.family == Family.BINOMIAL else None
    for k in range(K):
        held = ids == k
        train = ~held
        if problem.weights[train].sum() <= 0:
            raise ValueError(f"fold {k} has zero training weight")
        sub = SolverProblem(
            design=problem.design[train],
            target=problem.target[train],
            weights=problem.weights[train],
            offset=problem.offset[train],
            penalty_factors=problem.penalty_factors,
            nonneg=problem.nonneg,
            family=problem.family,
        )
        path = fit_path(sub, config, lambdas=lams)
        loss, mis = _held_out_losses(problem, path, np.flatnonzero(held))
        fold_loss[k] = loss
        if fold_mis is not None:
            fold_mis[k] = mis
    cv_mean = fold_loss.mean(axis=0)
    cv_se = fold_loss.std(axis=0, ddof=1) / np.sqrt(K) if K > 1 else np.zeros(L)
    idx_min = int(np.argmin(cv_mean))
    cutoff = cv_mean[idx_min] + cv_se[idx_min]
    idx_1se = int(np.flatnonzero(cv_mean <= cutoff)[0])
    mis_mean = mis_se = None
    if fold_mis is not None:
        mis_mean = fold_mis.mean(axis=0)
        mis_se = fold_mis.std(axis=0, ddof=1) / np.sqrt(K) if K > 1 else np.zeros(L)
    return CvResult(
        lambdas=lams,
        cv_mean=cv_mean,
        cv_se=cv_se,
        idx_min=idx_min,
        idx_1se=idx_1se,
        fold_assignment=ids,
        cv_misclass_mean=mis_mean,
        cv_misclass_se=mis_se,
    )


def cv_error_at_selected(cv: CvResult) -> float:
    """CV estimate of generalization error at the selected lambda."""
    return float(cv.cv_mean[cv.idx_min])
