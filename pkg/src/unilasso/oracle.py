"""Slow, obviously-correct reference implementations.

These ship with the library (not just the tests) so the CLI `verify`
subcommand can run them against the fast paths on user data.  None of them
share code with the implementations they check.
"""

from __future__ import annotations

import numpy as np

from .data_model import Family
from .solver import SolverProblem

__all__ = [
    "loo_refit_oracle",
    "projected_gradient_oracle",
    "nnls_active_set_oracle",
    "orthonormal_formula",
]

LOO_N_GUARD = 500
PG_Q_GUARD = 200
PG_MAX_ITER = 1_000_000


def _logistic_newton(x: np.ndarray, y: np.ndarray, iters: int = 50) -> tuple[float, float]:
    """Plain Newton for a univariate logistic fit; the long-run reference."""
    b0, b1 = 0.0, 0.0
    for _ in range(iters):
        eta = b0 + b1 * x
        p = 1.0 / (1.0 + np.exp(-eta))
        p = np.clip(p, 1e-10, 1 - 1e-10)
        w = p * (1 - p)
        g = np.array([(y - p).sum(), (x * (y - p)).sum()])
        H = np.array([[w.sum(), (w * x).sum()], [(w * x).sum(), (w * x * x).sum()]])
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        if np.abs(step).max() > 5.0:  # keep separated fits from blowing up
            step = step * (5.0 / np.abs(step).max())
        b0 += step[0]
        b1 += step[1]
        if np.abs(step).max() < 1e-12:
            break
    return b0, b1


def loo_refit_oracle(Z: np.ndarray, y: np.ndarray, family: Family = Family.GAUSSIAN) -> np.ndarray:
    """Exact LOO fit matrix by refitting each (i, j) univariate model.

    O(n^2 p); guarded at n <= 500.
    """
    n, p = Z.shape
    if n > LOO_N_GUARD:
        raise ValueError(f"refit oracle is limited to n <= {LOO_N_GUARD}")
    out = np.empty((n, p))
    for j in range(p):
        zj = Z[:, j]
        for i in range(n):
            keep = np.arange(n) != i
            x, t = zj[keep], y[keep]
            if family == Family.BINOMIAL:
                b0, b1 = _logistic_newton(x, t)
            else:
                sx = x - x.mean()
                varx = (sx * sx).sum()
                b1 = (sx * (t - t.mean())).sum() / varx if varx > 0 else 0.0
                b0 = t.mean() - b1 * x.mean()
            out[i, j] = b0 + b1 * zj[i]
    return out


def projected_gradient_oracle(problem: SolverProblem, lam: float, max_iter: int = PG_MAX_ITER) -> tuple[float, np.ndarray]:
    """Proximal/projected gradient on the stage-2 objective.

    Gaussian only.  Fixed step 1/L on the smooth part, projection onto the
    non-negative cone (soft-threshold when unconstrained), iterated until the
    objective change drops below 1e-10.  Returns (intercept, coefficients).
    """
    if problem.family != Family.GAUSSIAN:
        raise ValueError("projected gradient oracle covers the gaussian family only")
    D = problem.design
    n, q = D.shape
    if q > PG_Q_GUARD:
        raise ValueError(f"projected gradient oracle is limited to q <= {PG_Q_GUARD}")
    w = problem.norm_weights()
    pf = problem.penalty_factors
    y_eff = problem.target - problem.offset
    Dw = D * w[:, None]
    # Lipschitz constant of the smooth part (including the intercept column)
    A = np.column_stack([np.ones(n), D])
    L = np.linalg.eigvalsh((A * w[:, None]).T @ A / n).max()
    step = 1.0 / L
    theta = np.zeros(q)
    theta0 = 0.0

    def objective(t0, th):
        r = y_eff - t0 - D @ th
        pen = th if problem.nonneg else np.abs(th)
        return 0.5 * (w @ (r * r)) / n + lam * (pf @ pen)

    prev = objective(theta0, theta)
    for it in range(max_iter):
        r = y_eff - theta0 - D @ theta
        grad = -(Dw.T @ r) / n
        grad0 = -(w @ r) / n
        z = theta - step * grad
        if problem.nonneg:
            theta = np.maximum(0.0, z - step * lam * pf)
        else:
            theta = np.sign(z) * np.maximum(0.0, np.abs(z) - step * lam * pf)
        theta0 = theta0 - step * grad0
        cur = objective(theta0, theta)
        if abs(prev - cur) < 1e-10:
            return float(theta0), theta
        prev = cur
    raise RuntimeError(f"projected gradient did not settle within {max_iter} iterations")


def nnls_active_set_oracle(design: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Classical Lawson-Hanson active-set NNLS (no intercept, no penalty).

    Adds the most-violating coordinate, solves unconstrained least squares on
    the active set, and backtracks when a coefficient goes negative.
    """
    D = np.asarray(design, dtype=np.float64)
    b = np.asarray(target, dtype=np.float64)
    n, q = D.shape
    x = np.zeros(q)
    passive = np.zeros(q, dtype=bool)
    resid = b.copy()
    max_rounds = 10 * q
    for _ in range(max_rounds):
        grad = D.T @ resid
        grad[passive] = -np.inf
        j = int(np.argmax(grad))
        if grad[j] <= 1e-12:
            break
        passive[j] = True
        while True:
            idx = np.flatnonzero(passive)
            sol, *_ = np.linalg.lstsq(D[:, idx], b, rcond=None)
            if np.all(sol > 0):
                x[:] = 0.0
                x[idx] = sol
                break
            # backtrack along the segment to the first zero crossing
            cur = x[idx]
            neg = sol <= 0
            alpha = np.min(cur[neg] / (cur[neg] - sol[neg]))
            x[idx] = cur + alpha * (sol - cur)
            passive[np.abs(x) < 1e-14] = False
            x[np.abs(x) < 1e-14] = 0.0
        resid = b - D @ x
    return x


def orthonormal_formula(beta_hats: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form collapsed coefficients for an orthonormal design.

    Returns (two_stage, lasso): the two-stage rule shrinks beta_j by
    lam/|beta_j| (large coefficients shrunk less), the lasso comparator by
    the constant lam.  beta_j = 0 maps to 0.
    """
    b = np.asarray(beta_hats, dtype=np.float64)
    absb = np.abs(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        two_stage = np.where(absb > 0, np.sign(b) * np.maximum(absb - lam / np.where(absb > 0, absb, 1.0), 0.0), 0.0)
    lasso = np.sign(b) * np.maximum(absb - lam, 0.0)
    return two_stage, lasso
