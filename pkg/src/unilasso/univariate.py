"""Stage 1: all p univariate regressions and their leave-one-out fits.

Everything is vectorized across columns: a univariate fit on a standardized
column z_j reduces to delta_j = (1/n) z_j'y, and the LOO fitted values come
from the hat-diagonal identity

    y_i - eta_loo_ij = (y_i - eta_ij) / (1 - H_ii),   H_ii = 1/n + z_ij^2/n,

so the whole n x p LOO matrix is a handful of elementwise operations.
Binomial fits run IRLS simultaneously for all columns and apply the weighted
analogue of the same identity to the final working response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data_model import Dataset, Family, FitConfig, StandardizationStats, standardize

__all__ = [
    "UnivariateFits",
    "fit_univariate_gaussian",
    "loo_fits_gaussian",
    "fit_univariate_binomial",
    "loo_fits_binomial",
    "loo_correlation_threshold",
    "fit_stage1",
]

# Fitted probabilities are clamped away from {0,1}; the cap bounds the
# standardized-scale slope for separated columns (unbounded slopes would
# destroy stage 2).
PROB_CLAMP = 1e-5
LOO_REFINE_N_MAX = 2000
SLOPE_CAP = 10.0
IRLS_STEPS = 4
IRLS_MAX_STEPS = 25


@dataclass(frozen=True)
class UnivariateFits:
    """Per-feature intercepts/slopes plus in-sample and LOO fit matrices.

    Slopes and intercepts are on the original feature scale; the fit
    matrices are linear predictors (identical to fitted values for the
    gaussian family).
    """

    intercepts: np.ndarray  # length p
    slopes: np.ndarray  # length p
    insample_fits: np.ndarray  # n x p
    loo_fits: np.ndarray | None  # n x p, filled by the loo_* operations
    stats: StandardizationStats
    family: Family = Family.GAUSSIAN
    separated: np.ndarray | None = None  # binomial only
    # standardized-scale coefficients, kept for the LOO computation
    delta0: np.ndarray | None = None
    delta: np.ndarray | None = None
    working_response: np.ndarray | None = None  # binomial, n x p
    working_weights: np.ndarray | None = None  # binomial, n x p


def fit_univariate_gaussian(
    Z: np.ndarray, y: np.ndarray, stats: StandardizationStats, n_workers: int = 1
) -> UnivariateFits:
    """Least squares of y on each standardized column, mapped back to the
    original scale.  Constant (masked) columns get slope 0, intercept ybar."""
    n = Z.shape[0]
    ybar = y.mean()
    delta = Z.T @ y / n
    delta[stats.constant_mask] = 0.0
    slopes = delta / stats.sds
    intercepts = ybar - delta * stats.means / stats.sds
    insample = ybar + Z * delta
    return UnivariateFits(
        intercepts=intercepts,
        slopes=slopes,
        insample_fits=insample,
        loo_fits=None,
        stats=stats,
        family=Family.GAUSSIAN,
        delta0=np.full(Z.shape[1], ybar),
        delta=delta,
    )


def loo_fits_gaussian(fits: UnivariateFits, Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Exact LOO fitted-value matrix via the hat-diagonal formula.

    With z_ij = 0 (constant columns) the formula degrades to the
    intercept-only LOO mean (n*ybar - y_i)/(n-1), so no special casing.
    """
    n = Z.shape[0]
    H = (1.0 + Z * Z) / n
    denom = 1.0 - H
    if np.any(denom < 1e-12):
        i, j = np.argwhere(denom < 1e-12)[0]
        raise FloatingPointError(
            f"LOO leverage ~1 at row {i}, column {j}; n={n} is too small for this column"
        )
    resid = y[:, None] - fits.insample_fits
    return y[:, None] - resid / denom


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def fit_univariate_binomial(
    Z: np.ndarray, y: np.ndarray, stats: StandardizationStats, n_workers: int = 1, tol: float = 1e-8
) -> UnivariateFits:
    """Per-column logistic regression via IRLS, all columns at once.

    Runs 4 Newton steps, continuing up to 25 while the per-column deviance
    is still moving by more than tol.  Columns whose standardized slope hits
    the cap are flagged as separated and frozen at the cap.
    """
    n, p = Z.shape
    ybar = min(max(y.mean(), PROB_CLAMP), 1.0 - PROB_CLAMP)
    delta0 = np.full(p, _logit(ybar))
    delta = np.zeros(p)
    dev = np.full(p, np.inf)
    U = np.zeros((n, p))
    W = np.full((n, p), 0.25)
    for step in range(IRLS_MAX_STEPS):
        eta = delta0 + Z * delta
        prob = 1.0 / (1.0 + np.exp(-eta))
        np.clip(prob, PROB_CLAMP, 1.0 - PROB_CLAMP, out=prob)
        W = prob * (1.0 - prob)
        U = eta + (y[:, None] - prob) / W
        sw = W.sum(axis=0)
        zbar = (W * Z).sum(axis=0) / sw
        ubar = (W * U).sum(axis=0) / sw
        Zc = Z - zbar
        szz = (W * Zc * Zc).sum(axis=0)
        szu = (W * Zc * (U - ubar)).sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            delta = np.where(szz > 0, szu / szz, 0.0)
        np.clip(delta, -SLOPE_CAP, SLOPE_CAP, out=delta)
        delta0 = ubar - delta * zbar
        eta = delta0 + Z * delta
        prob = 1.0 / (1.0 + np.exp(-eta))
        np.clip(prob, PROB_CLAMP, 1.0 - PROB_CLAMP, out=prob)
        new_dev = -2.0 * (y[:, None] * np.log(prob) + (1 - y[:, None]) * np.log(1 - prob)).sum(axis=0)
        moved = np.abs(dev - new_dev)
        dev = new_dev
        if step + 1 >= IRLS_STEPS and moved.max() <= tol * n:
            break
    separated = np.abs(delta) >= SLOPE_CAP
    delta = np.where(stats.constant_mask, 0.0, delta)
    delta0 = np.where(stats.constant_mask, _logit(ybar), delta0)
    slopes = delta / stats.sds
    intercepts = delta0 - delta * stats.means / stats.sds
    insample = delta0 + Z * delta
    return UnivariateFits(
        intercepts=intercepts,
        slopes=slopes,
        insample_fits=insample,
        loo_fits=None,
        stats=stats,
        family=Family.BINOMIAL,
        separated=separated,
        delta0=delta0,
        delta=delta,
        working_response=U,
        working_weights=W,
    )


def loo_fits_binomial(fits: UnivariateFits, Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Approximate LOO linear predictors from the final IRLS iteration.

    One weighted-least-squares pass: leverage of row i in column j is
    w_ij (1/sw_j + (z_ij - zbar_j)^2 / szz_j), and the unweighted LOO
    residual identity applies to the working response.  Separated columns
    keep their (capped) in-sample fits.
    """
    W, U = fits.working_weights, fits.working_response
    if W is None or U is None:
        raise ValueError("binomial fits carry no IRLS state; refit first")
    sw = W.sum(axis=0)
    zbar = (W * Z).sum(axis=0) / sw
    Zc = Z - zbar
    szz = (W * Zc * Zc).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        H = W * (1.0 / sw + np.where(szz > 0, Zc * Zc / szz, 0.0))
    denom = 1.0 - H
    if np.any(denom < 1e-12):
        i, j = np.argwhere(denom < 1e-12)[0]
        raise FloatingPointError(
            f"weighted LOO leverage ~1 at row {i}, column {j}"
        )
    loo = U - (U - fits.insample_fits) / denom
    skip = fits.stats.constant_mask.copy()
    if fits.separated is not None:
        skip |= fits.separated
    n = Z.shape[0]
    if n <= LOO_REFINE_N_MAX:
        loo = _refine_loo_binomial(fits, Z, y, W, U, H, skip, loo)
    if fits.separated is not None and fits.separated.any():
        loo[:, fits.separated] = fits.insample_fits[:, fits.separated]
    if fits.stats.constant_mask.any():
        loo[:, fits.stats.constant_mask] = fits.insample_fits[:, fits.stats.constant_mask]
    return loo


def _refine_loo_binomial(
    fits: UnivariateFits,
    Z: np.ndarray,
    y: np.ndarray,
    W: np.ndarray,
    U: np.ndarray,
    H: np.ndarray,
    skip: np.ndarray,
    fallback: np.ndarray,
) -> np.ndarray:
    """One Newton step on each leave-one-out likelihood.

    The weighted-leverage formula equals a single Newton step from the full
    fit; starting from its coefficient pair and taking one more exact Newton
    step on the held-out likelihood removes most of the remaining error.
    Costs O(n^2) per column, so it is gated by LOO_REFINE_N_MAX.
    """
    n, p = Z.shape
    loo = fallback.copy()
    for j in range(p):
        if skip[j]:
            continue
        w, u, z = W[:, j], U[:, j], Z[:, j]
        sw = w.sum()
        zbar = (w * z).sum() / sw
        zc = z - zbar
        szz = (w * zc * zc).sum()
        if szz <= 0:
            continue
        # centered WLS coefficients of the final IRLS pass
        d1 = (w * zc * u).sum() / szz
        d0c = (w * u).sum() / sw
        e = u - (d0c + d1 * zc)
        scale = w * e / (1.0 - H[:, j])
        b0 = d0c - scale / sw  # per-left-out-row coefficient pairs
        b1 = d1 - scale * zc / szz
        # one Newton step on the held-out likelihood (columns index the
        # left-out row, rows index the observations that remain)
        E = b0[None, :] + zc[:, None] * b1[None, :]
        P = 1.0 / (1.0 + np.exp(-E))
        np.clip(P, PROB_CLAMP, 1.0 - PROB_CLAMP, out=P)
        V = P * (1.0 - P)
        R = P - y[:, None]
        idx = np.arange(n)
        g0 = R.sum(axis=0) - R[idx, idx]
        g1 = zc @ R - zc * R[idx, idx]
        h00 = V.sum(axis=0) - V[idx, idx]
        h01 = zc @ V - zc * V[idx, idx]
        h11 = (zc * zc) @ V - zc * zc * V[idx, idx]
        det = h00 * h11 - h01 * h01
        ok = det > 1e-12
        step0 = np.where(ok, (h11 * g0 - h01 * g1) / np.where(ok, det, 1.0), 0.0)
        step1 = np.where(ok, (h00 * g1 - h01 * g0) / np.where(ok, det, 1.0), 0.0)
        loo[:, j] = (b0 - step0) + (b1 - step1) * zc
    return loo


def loo_correlation_threshold(n: int) -> float:
    """Absolute correlation below which the LOO fit flips to negative
    correlation with the response: sqrt(2/n)."""
    if n < 3:
        raise ValueError("n must be >= 3")
    return math.sqrt(2.0 / n)


def fit_stage1(dataset: Dataset, config: FitConfig | None = None) -> tuple[np.ndarray, UnivariateFits]:
    """Standardize, fit all univariate models and attach LOO fits.

    Returns the standardized matrix (stage 2 sometimes reuses it) and the
    completed UnivariateFits.  With config.loo=False the loo_fits field is
    still populated; variant selection happens downstream.
    """
    Z, stats = standardize(dataset)
    y = dataset.response
    if dataset.family == Family.BINOMIAL:
        fits = fit_univariate_binomial(Z, y, stats)
        loo = loo_fits_binomial(fits, Z, y)
    else:
        fits = fit_univariate_gaussian(Z, y, stats)
        loo = loo_fits_gaussian(fits, Z, y)
    return Z, replace(fits, loo_fits=loo)
