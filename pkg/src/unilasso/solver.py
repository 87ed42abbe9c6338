"""Stage 2: box-constrained lasso path via cyclic coordinate descent.

Loss convention is glmnet's: (1/(2n)) sum_i w_i (y_i - theta0 - offset_i -
d_i'theta)^2 + lam * sum_j pf_j * p(theta_j), with p(theta) = theta on the
non-negative cone and |theta| otherwise.  Columns are never rescaled
internally: scale is part of the signal the second stage is meant to use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernel import cd_solve
from .data_model import Family, FitConfig

__all__ = [
    "SolverProblem",
    "PathSolution",
    "SingleSolution",
    "SolverError",
    "lambda_max",
    "lambda_grid",
    "fit_path",
    "solve_at",
    "kkt_max_violation",
]

PROB_CLAMP = 1e-5
IRLS_OUTER_MAX = 25


class SolverError(RuntimeError):
    """Coordinate descent failed to converge within max_iter sweeps."""

    def __init__(self, message: str, lambda_index: int | None = None, last_delta: float | None = None):
        super().__init__(message)
        self.lambda_index = lambda_index
        self.last_delta = last_delta


@dataclass(frozen=True)
class SolverProblem:
    """A single stage-2 fitting problem.

    design columns are used as-is (no internal standardization); nonneg=True
    puts a zero lower bound on every coefficient.
    """

    design: np.ndarray
    target: np.ndarray
    weights: np.ndarray | None = None
    offset: np.ndarray | None = None
    penalty_factors: np.ndarray | None = None
    nonneg: bool = True
    family: Family = Family.GAUSSIAN

    def __post_init__(self):
        D = np.asfortranarray(np.asarray(self.design, dtype=np.float64))
        object.__setattr__(self, "design", D)
        object.__setattr__(self, "target", np.asarray(self.target, dtype=np.float64))
        n, q = D.shape
        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=np.float64)
        if w.sum() <= 0:
            raise ValueError("weights must have positive sum")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        off = np.zeros(n) if self.offset is None else np.asarray(self.offset, dtype=np.float64)
        pf = np.ones(q) if self.penalty_factors is None else np.asarray(self.penalty_factors, dtype=np.float64)
        if not np.all(np.isfinite(pf)) or np.any(pf < 0):
            raise ValueError("penalty factors must be finite and non-negative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offset", off)
        object.__setattr__(self, "penalty_factors", pf)
        object.__setattr__(self, "family", Family(self.family))

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def q(self) -> int:
        return self.design.shape[1]

    def norm_weights(self) -> np.ndarray:
        """Weights rescaled to average 1 (keeps lambda comparable)."""
        w = self.weights
        return w * (len(w) / w.sum())


@dataclass(frozen=True)
class PathSolution:
    lambdas: np.ndarray
    intercepts: np.ndarray
    coefs: np.ndarray  # n_lambda x q
    n_active: np.ndarray
    objective: np.ndarray
    nonneg: bool = True
    family: Family = Family.GAUSSIAN

    def __len__(self) -> int:
        return len(self.lambdas)


@dataclass(frozen=True)
class SingleSolution:
    intercept: float
    coefs: np.ndarray
    sweeps: int
    objective: float


def _null_gradient(problem: SolverProblem) -> tuple[np.ndarray, float]:
    """Per-column (1/n) <w*col, residual> at the null (intercept-only) model."""
    w = problem.norm_weights()
    n = problem.n
    if problem.family == Family.BINOMIAL:
        # null fit on the probability scale, offset folded into the gradient
        y = problem.target
        pbar = float(w @ y / n)
        pbar = min(max(pbar, PROB_CLAMP), 1.0 - PROB_CLAMP)
        if np.any(problem.offset != 0.0):
            eta0 = np.log(pbar / (1 - pbar))
            prob = 1.0 / (1.0 + np.exp(-(eta0 + problem.offset)))
            r = y - prob
        else:
            r = y - pbar
        g = problem.design.T @ (w * r) / n
        return g, 0.0
    y_eff = problem.target - problem.offset
    theta0 = float(w @ y_eff / n)
    g = problem.design.T @ (w * (y_eff - theta0)) / n
    return g, theta0


def lambda_max(problem: SolverProblem) -> float:
    """Smallest lambda at which every penalized coefficient is zero."""
    g, _ = _null_gradient(problem)
    pf = problem.penalty_factors
    vals = np.maximum(g, 0.0) if problem.nonneg else np.abs(g)
    with np.errstate(divide="ignore"):
        scaled = np.where(pf > 0, vals / np.where(pf > 0, pf, 1.0), 0.0)
    return float(scaled.max(initial=0.0))


def lambda_grid(problem: SolverProblem, config: FitConfig) -> np.ndarray:
    """Geometric grid from lambda_max down to lambda_max * min_ratio.

    A zero lambda_max (all columns orthogonal to the target) degenerates to
    the single point lambda = 0.
    """
    lmax = lambda_max(problem)
    if lmax <= 0.0:
        return np.array([0.0])
    ratio = config.min_ratio(problem.n, problem.q)
    return lmax * np.exp(np.linspace(0.0, np.log(ratio), config.n_lambda))


def _gaussian_objective(problem, w, resid, theta, lam) -> float:
    pen = theta if problem.nonneg else np.abs(theta)
    return float(0.5 * (w @ (resid * resid)) / problem.n + lam * (problem.penalty_factors @ pen))


def _binomial_nll(problem, w, theta0, theta) -> float:
    eta = theta0 + problem.offset + problem.design @ theta
    prob = 1.0 / (1.0 + np.exp(-eta))
    np.clip(prob, PROB_CLAMP, 1.0 - PROB_CLAMP, out=prob)
    y = problem.target
    return float(-(w @ (y * np.log(prob) + (1 - y) * np.log(1 - prob))) / problem.n)


def _binomial_objective(problem, w, theta0, theta, lam) -> float:
    pen = theta if problem.nonneg else np.abs(theta)
    return _binomial_nll(problem, w, theta0, theta) + lam * float(problem.penalty_factors @ pen)


def _solve_gaussian(problem, w, lam, theta, theta0, tol, max_iter, lam_index=None):
    D = problem.design
    n = problem.n
    col_sq = (w @ (D * D)) / n
    resid = (problem.target - problem.offset) - theta0 - D @ theta
    theta0, sweeps, ok = cd_solve(
        D, col_sq, w, resid, theta, theta0, lam, problem.penalty_factors,
        problem.nonneg, tol, max_iter,
    )
    if not ok:
        raise SolverError(
            f"coordinate descent did not converge at lambda index {lam_index} after {sweeps} sweeps",
            lambda_index=lam_index,
        )
    return theta0, resid, sweeps


def _solve_binomial(problem, w, lam, theta, theta0, tol, max_iter, lam_index=None):
    """Outer IRLS around the weighted gaussian kernel, with step-halving."""
    D = problem.design
    n = problem.n
    nll = _binomial_nll(problem, w, theta0, theta)
    total_sweeps = 0
    for _ in range(IRLS_OUTER_MAX):
        eta = theta0 + problem.offset + D @ theta
        prob = 1.0 / (1.0 + np.exp(-eta))
        np.clip(prob, PROB_CLAMP, 1.0 - PROB_CLAMP, out=prob)
        wk = prob * (1.0 - prob)
        u = (eta - problem.offset) + (problem.target - prob) / wk
        ww = w * wk
        col_sq = (ww @ (D * D)) / n
        th_prev, t0_prev = theta.copy(), theta0
        resid = u - theta0 - D @ theta
        theta0, sweeps, ok = cd_solve(
            D, col_sq, ww, resid, theta, theta0, lam, problem.penalty_factors,
            problem.nonneg, tol, max_iter,
        )
        total_sweeps += sweeps
        if not ok:
            raise SolverError(
                f"inner coordinate descent did not converge at lambda index {lam_index}",
                lambda_index=lam_index,
            )
        new_nll = _binomial_nll(problem, w, theta0, theta)
        step = 1.0
        while new_nll > nll + 1e-12 and step > 1e-6:
            step *= 0.5
            theta = th_prev + step * (theta - th_prev)
            theta0 = t0_prev + step * (theta0 - t0_prev)
            new_nll = _binomial_nll(problem, w, theta0, theta)
        if abs(nll - new_nll) < 1e-10 * max(1.0, abs(nll)):
            nll = new_nll
            break
        nll = new_nll
    return theta0, theta, total_sweeps


def fit_path(
    problem: SolverProblem,
    config: FitConfig,
    lambdas: np.ndarray | None = None,
) -> PathSolution:
    """Solve along a decreasing lambda grid with warm starts.

    An explicit lambdas argument overrides the grid (CV folds reuse the
    full-data grid this way).
    """
    lams = lambda_grid(problem, config) if lambdas is None else np.asarray(lambdas, dtype=np.float64)
    w = problem.norm_weights()
    q = problem.q
    theta = np.zeros(q)
    theta0 = 0.0
    L = len(lams)
    coefs = np.empty((L, q))
    intercepts = np.empty(L)
    objective = np.empty(L)
    binomial = problem.family == Family.BINOMIAL
    for k, lam in enumerate(lams):
        if binomial:
            theta0, theta, _ = _solve_binomial(
                problem, w, lam, theta, theta0, config.tol, config.max_iter, lam_index=k
            )
            objective[k] = _binomial_objective(problem, w, theta0, theta, lam)
        else:
            theta0, resid, _ = _solve_gaussian(
                problem, w, lam, theta, theta0, config.tol, config.max_iter, lam_index=k
            )
            objective[k] = _gaussian_objective(problem, w, resid, theta, lam)
        coefs[k] = theta
        intercepts[k] = theta0
    return PathSolution(
        lambdas=lams,
        intercepts=intercepts,
        coefs=coefs,
        n_active=np.count_nonzero(coefs, axis=1),
        objective=objective,
        nonneg=problem.nonneg,
        family=problem.family,
    )


def solve_at(
    problem: SolverProblem,
    lam: float,
    warm: np.ndarray | None = None,
    warm_intercept: float = 0.0,
    config: FitConfig | None = None,
) -> SingleSolution:
    """Single-lambda solve; lambda = 0 gives (non-negative) least squares."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    config = config or FitConfig()
    w = problem.norm_weights()
    theta = np.zeros(problem.q) if warm is None else warm.astype(np.float64).copy()
    theta0 = warm_intercept
    if problem.family == Family.BINOMIAL:
        theta0, theta, sweeps = _solve_binomial(problem, w, lam, theta, theta0, config.tol, config.max_iter)
        obj = _binomial_objective(problem, w, theta0, theta, lam)
    else:
        theta0, resid, sweeps = _solve_gaussian(problem, w, lam, theta, theta0, config.tol, config.max_iter)
        obj = _gaussian_objective(problem, w, resid, theta, lam)
    return SingleSolution(intercept=float(theta0), coefs=theta, sweeps=sweeps, objective=obj)


def kkt_max_violation(problem: SolverProblem, intercept: float, theta: np.ndarray, lam: float) -> float:
    """Largest KKT residual of a gaussian solution.

    Active coordinates must satisfy (1/n)<w*col, resid> = lam*pf (nonneg) or
    = lam*pf*sign(theta); zero coordinates need (1/n)<w*col, resid> <= lam*pf
    (one-sided under non-negativity, two-sided otherwise).
    """
    w = problem.norm_weights()
    n = problem.n
    resid = problem.target - problem.offset - intercept - problem.design @ theta
    g = problem.design.T @ (w * resid) / n
    lampf = lam * problem.penalty_factors
    active = theta != 0.0
    viol = 0.0
    if active.any():
        if problem.nonneg:
            viol = np.abs(g[active] - lampf[active]).max()
        else:
            viol = np.abs(g[active] - lampf[active] * np.sign(theta[active])).max()
    if (~active).any():
        gz = g[~active] if problem.nonneg else np.abs(g[~active])
        viol = max(viol, float((gz - lampf[~active]).max(initial=-np.inf)), 0.0)
    viol = max(viol, abs(float(w @ resid) / n))  # intercept stationarity
    return float(viol)
