"""End-to-end estimators: the two-stage lasso, its lambda->0 limit, the
polish post-processor, ablation variants, external-score mode, one-vs-rest
multiclass, and a plain-lasso comparator.

Stage 2 never standardizes its columns.  Every stage-2 column is affine in
the underlying feature, c_ij = a_j + b_j * x_ij, so the fitted two-stage
model collapses to a single linear model
    gamma_j = b_j * theta_j,    gamma_0 = theta_0 + sum_l a_l * theta_l.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cv import CvResult, fold_ids, kfold_cv
from .data_model import Dataset, Family, FitConfig, standardize, validate
from .solver import (
    PathSolution,
    SolverProblem,
    fit_path,
    lambda_grid,
    solve_at,
)
from .univariate import UnivariateFits, fit_stage1

__all__ = [
    "CollapsedModel",
    "ExternalScores",
    "OvrModel",
    "unilasso_cv",
    "unireg",
    "unireg_bootstrap_ci",
    "polish",
    "variant_fit",
    "adaptive_lasso_path",
    "unilasso_external",
    "lasso_cv",
    "collapsed_path",
    "ovr_multiclass",
    "predict",
    "predict_proba",
    "model_to_json",
    "model_from_json",
]

UNIREG_TERMINAL_RATIO = 1e-8


@dataclass(frozen=True)
class CollapsedModel:
    """Final single-linear-model form of a two-stage fit."""

    gamma0: float
    gammas: np.ndarray
    thetas: np.ndarray
    univariate: UnivariateFits | None
    lambda_selected: float
    family: Family
    variant_tag: str
    feature_names: tuple[str, ...] | None = None

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.gammas)


@dataclass(frozen=True)
class ExternalScores:
    """Published univariate summaries from an external cohort."""

    slopes: np.ndarray
    intercepts: np.ndarray | None = None
    ses: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "slopes", np.asarray(self.slopes, dtype=np.float64))
        if not np.all(np.isfinite(self.slopes)):
            raise ValueError("external slopes must be finite")
        if self.intercepts is not None:
            ic = np.asarray(self.intercepts, dtype=np.float64)
            if ic.shape != self.slopes.shape or not np.all(np.isfinite(ic)):
                raise ValueError("external intercepts must be finite and match slopes")
            object.__setattr__(self, "intercepts", ic)


@dataclass(frozen=True)
class OvrModel:
    classes: np.ndarray
    models: tuple[CollapsedModel, ...]


def _collapse(a: np.ndarray, b: np.ndarray, theta0: float, thetas: np.ndarray) -> tuple[float, np.ndarray]:
    gammas = b * thetas
    gamma0 = theta0 + float(a @ thetas)
    return gamma0, gammas


def _stage2_columns(fits: UnivariateFits, Z: np.ndarray, dataset: Dataset, config: FitConfig):
    """Build the stage-2 design and its collapse coefficients (a, b).

    Masked (constant) columns are zeroed so their theta can never move.
    """
    mask = fits.stats.constant_mask
    if config.use_magnitude:
        design = fits.loo_fits if config.loo else fits.insample_fits
        design = np.asfortranarray(design.copy())
        a, b = fits.intercepts.copy(), fits.slopes.copy()
    else:
        # sign-only scaling: standardized column times the univariate sign
        sign = np.sign(fits.slopes)
        design = np.asfortranarray(Z * sign)
        s = fits.stats.sds
        a = -sign * fits.stats.means / s
        b = sign / s
    design[:, mask] = 0.0
    a[mask] = 0.0
    b[mask] = 0.0
    return design, a, b


def _strict_cv(problem: SolverProblem, dataset: Dataset, config: FitConfig, lams: np.ndarray) -> CvResult:
    """CV that refits stage 1 inside every fold (no LOO-feature leak)."""
    n = dataset.n
    K = config.n_folds
    ids = fold_ids(n, K, config.seed)
    L = len(lams)
    fold_loss = np.empty((K, L))
    fold_mis = np.empty((K, L)) if dataset.family == Family.BINOMIAL else None
    for k in range(K):
        train = ids != k
        sub = Dataset(
            features=dataset.features[train],
            response=dataset.response[train],
            family=dataset.family,
        )
        Z_tr, fits_tr = fit_stage1(sub, config)
        design, a, b = _stage2_columns(fits_tr, Z_tr, sub, config)
        sub_problem = SolverProblem(
            design=design, target=sub.response, nonneg=config.sign_constraint, family=dataset.family
        )
        path = fit_path(sub_problem, config, lambdas=lams)
        # collapsed predictions on the held-out raw features
        Xh = dataset.features[~train]
        yh = dataset.response[~train]
        g0 = path.intercepts + path.coefs @ a
        eta = g0[None, :] + Xh @ (path.coefs * b).T
        if dataset.family == Family.BINOMIAL:
            prob = 1.0 / (1.0 + np.exp(-eta))
            np.clip(prob, 1e-5, 1 - 1e-5, out=prob)
            dev = -2.0 * (yh[:, None] * np.log(prob) + (1 - yh[:, None]) * np.log(1 - prob))
            fold_loss[k] = dev.mean(axis=0)
            fold_mis[k] = ((prob >= 0.5) != (yh[:, None] == 1.0)).mean(axis=0)
        else:
            fold_loss[k] = ((yh[:, None] - eta) ** 2).mean(axis=0)
    cv_mean = fold_loss.mean(axis=0)
    cv_se = fold_loss.std(axis=0, ddof=1) / np.sqrt(K)
    idx_min = int(np.argmin(cv_mean))
    idx_1se = int(np.flatnonzero(cv_mean <= cv_mean[idx_min] + cv_se[idx_min])[0])
    mis_mean = fold_mis.mean(axis=0) if fold_mis is not None else None
    mis_se = fold_mis.std(axis=0, ddof=1) / np.sqrt(K) if fold_mis is not None else None
    return CvResult(
        lambdas=lams, cv_mean=cv_mean, cv_se=cv_se, idx_min=idx_min, idx_1se=idx_1se,
        fold_assignment=ids, cv_misclass_mean=mis_mean, cv_misclass_se=mis_se,
    )


def _fit_two_stage(dataset: Dataset, config: FitConfig, variant_tag: str, strict_cv: bool = False):
    validate(dataset)
    Z, fits = fit_stage1(dataset, config)
    design, a, b = _stage2_columns(fits, Z, dataset, config)
    problem = SolverProblem(
        design=design, target=dataset.response, nonneg=config.sign_constraint, family=dataset.family
    )
    lams = lambda_grid(problem, config)
    path = fit_path(problem, config, lambdas=lams)
    if strict_cv:
        cv = _strict_cv(problem, dataset, config, lams)
    else:
        cv = kfold_cv(problem, config, lambdas=lams)
    k = cv.idx_min
    gamma0, gammas = _collapse(a, b, float(path.intercepts[k]), path.coefs[k])
    model = CollapsedModel(
        gamma0=gamma0,
        gammas=gammas,
        thetas=path.coefs[k].copy(),
        univariate=fits,
        lambda_selected=float(lams[k]),
        family=dataset.family,
        variant_tag=variant_tag,
        feature_names=dataset.feature_names,
    )
    return model, cv, path, (a, b)


def unilasso_cv(dataset: Dataset, config: FitConfig | None = None, strict_cv: bool = False):
    """The full two-stage procedure with CV-selected lambda.

    Returns (CollapsedModel, CvResult, PathSolution).  The path carries
    stage-2 (theta) coefficients; collapse them with model.univariate.slopes.
    """
    config = config or FitConfig()
    model, cv, path, _ = _fit_two_stage(dataset, config, "unilasso", strict_cv=strict_cv)
    return model, cv, path


def variant_fit(dataset: Dataset, config: FitConfig):
    """Ablation grid over {loo, sign_constraint, use_magnitude}.

    loo=False swaps LOO columns for in-sample fits; sign_constraint=False
    lifts the non-negativity (penalty becomes lam*sum|theta|);
    use_magnitude=False uses sign(beta_j) * standardized x_j columns.
    Returns (CollapsedModel, CvResult, PathSolution).
    """
    if not config.loo and not config.sign_constraint:
        tag = "adaptive"
    elif not config.sign_constraint:
        tag = "no_sign"
    elif not config.use_magnitude:
        tag = "no_mag"
    else:
        tag = "unilasso"
    model, cv, path, _ = _fit_two_stage(dataset, config, tag)
    return model, cv, path


def adaptive_lasso_path(dataset: Dataset, lambdas: np.ndarray, config: FitConfig, sign_constrained: bool = False):
    """Direct adaptive-lasso solve on the raw features with penalty factors
    1/|beta_j| from the univariate slopes.

    The sign-constrained form substitutes u_j = sign(beta_j) * gamma_j >= 0.
    Returns per-lambda (intercepts, gammas) on the original feature scale.
    """
    Z, fits = fit_stage1(dataset, config)
    beta = fits.slopes
    absb = np.abs(beta)
    mask = fits.stats.constant_mask | (absb == 0)
    pf = np.where(mask, 1.0, 1.0 / np.where(mask, 1.0, absb))
    X = dataset.features.copy()
    sign = np.ones(dataset.p)
    if sign_constrained:
        sign = np.where(np.sign(beta) == 0, 1.0, np.sign(beta))
        X = X * sign
    X[:, mask] = 0.0
    problem = SolverProblem(
        design=X, target=dataset.response, penalty_factors=pf,
        nonneg=sign_constrained, family=dataset.family,
    )
    path = fit_path(problem, config, lambdas=lambdas)
    gammas = path.coefs * sign
    return path.intercepts, gammas


def unilasso_external(dataset: Dataset, scores: ExternalScores, config: FitConfig | None = None):
    """Stage 2 on externally supplied univariate fits (no LOO).

    Missing external intercepts default to ybar - slope_j * xbar_j computed
    on the training data.  Returns (CollapsedModel, CvResult, PathSolution).
    """
    config = config or FitConfig()
    validate(dataset)
    if len(scores.slopes) != dataset.p:
        raise ValueError(f"got {len(scores.slopes)} external scores for p={dataset.p} features")
    X = dataset.features
    b = scores.slopes
    if scores.intercepts is None:
        a = dataset.response.mean() - b * X.mean(axis=0)
    else:
        a = scores.intercepts
    design = np.asfortranarray(a + X * b)
    problem = SolverProblem(
        design=design, target=dataset.response, nonneg=config.sign_constraint, family=dataset.family
    )
    lams = lambda_grid(problem, config)
    path = fit_path(problem, config, lambdas=lams)
    cv = kfold_cv(problem, config, lambdas=lams)
    k = cv.idx_min
    gamma0, gammas = _collapse(a, b, float(path.intercepts[k]), path.coefs[k])
    model = CollapsedModel(
        gamma0=gamma0, gammas=gammas, thetas=path.coefs[k].copy(), univariate=None,
        lambda_selected=float(lams[k]), family=dataset.family, variant_tag="external",
        feature_names=dataset.feature_names,
    )
    return model, cv, path


def unireg(dataset: Dataset, config: FitConfig | None = None) -> CollapsedModel:
    """The lambda -> 0 limit of the two-stage fit.

    With p < n this is an exact non-negative least squares on the LOO
    columns (solved at lambda = 0, warm-started from a short path); with
    p >= n it is the terminal solution of a path down to 1e-8 * lambda_max,
    approximating the minimum-l1-norm limit.
    """
    config = config or FitConfig()
    validate(dataset)
    Z, fits = fit_stage1(dataset, config)
    design, a, b = _stage2_columns(fits, Z, dataset, config)
    problem = SolverProblem(
        design=design, target=dataset.response, nonneg=config.sign_constraint, family=dataset.family
    )
    warm_cfg = config.with_(lambda_min_ratio=UNIREG_TERMINAL_RATIO, n_lambda=max(config.n_lambda, 50))
    path = fit_path(problem, warm_cfg)
    theta = path.coefs[-1].copy()
    theta0 = float(path.intercepts[-1])
    lam_sel = float(path.lambdas[-1])
    if dataset.p < dataset.n:
        sol = solve_at(problem, 0.0, warm=theta, warm_intercept=theta0, config=config)
        theta, theta0, lam_sel = sol.coefs, sol.intercept, 0.0
    gamma0, gammas = _collapse(a, b, theta0, theta)
    return CollapsedModel(
        gamma0=gamma0, gammas=gammas, thetas=theta, univariate=fits,
        lambda_selected=lam_sel, family=dataset.family, variant_tag="unireg",
        feature_names=dataset.feature_names,
    )


def unireg_bootstrap_ci(
    dataset: Dataset, config: FitConfig | None = None, n_boot: int = 200, level: float = 0.95
) -> np.ndarray:
    """Row-resample percentile intervals for the collapsed coefficients.

    Returns a p x 2 array of (lower, upper) per coefficient; deterministic
    given config.seed.
    """
    if n_boot < 100:
        raise ValueError("n_boot must be >= 100 for stable percentiles")
    config = config or FitConfig()
    rng = np.random.default_rng(config.seed)
    n = dataset.n
    draws = np.empty((n_boot, dataset.p))
    for bi in range(n_boot):
        rows = rng.integers(0, n, size=n)
        boot = Dataset(
            features=dataset.features[rows], response=dataset.response[rows],
            family=dataset.family, feature_names=dataset.feature_names,
        )
        draws[bi] = unireg(boot, config).gammas
    alpha = (1.0 - level) / 2.0
    return np.quantile(draws, [alpha, 1.0 - alpha], axis=0).T


def lasso_cv(dataset: Dataset, config: FitConfig | None = None):
    """Plain lasso comparator: internally standardized columns, unconstrained,
    unit penalty factors, coefficients mapped back to the original scale.

    Returns (CollapsedModel, CvResult, PathSolution with collapsed coefs).
    """
    config = config or FitConfig()
    validate(dataset)
    Z, stats = standardize(dataset)
    s, m = stats.sds, stats.means
    a = np.where(stats.constant_mask, 0.0, -m / s)
    b = np.where(stats.constant_mask, 0.0, 1.0 / s)
    problem = SolverProblem(design=Z, target=dataset.response, nonneg=False, family=dataset.family)
    lams = lambda_grid(problem, config)
    path = fit_path(problem, config, lambdas=lams)
    cv = kfold_cv(problem, config, lambdas=lams)
    k = cv.idx_min
    gamma0, gammas = _collapse(a, b, float(path.intercepts[k]), path.coefs[k])
    model = CollapsedModel(
        gamma0=gamma0, gammas=gammas, thetas=path.coefs[k].copy(), univariate=None,
        lambda_selected=float(lams[k]), family=dataset.family, variant_tag="lasso",
        feature_names=dataset.feature_names,
    )
    collapsed = PathSolution(
        lambdas=lams,
        intercepts=path.intercepts + path.coefs @ a,
        coefs=path.coefs * b,
        n_active=path.n_active,
        objective=path.objective,
        nonneg=False,
        family=dataset.family,
    )
    return model, cv, collapsed


def polish(dataset: Dataset, base_model: CollapsedModel, base_path: PathSolution, config: FitConfig | None = None):
    """Run a plain lasso, offset by the CV-selected base fit, and stitch.

    The stitched path starts with the base path collapsed up to the selected
    lambda and continues with cumulative (base + polish) coefficients; its
    first polish point reproduces the base model.  Returns
    (CollapsedModel, stitched PathSolution, polish CvResult).
    """
    config = config or FitConfig()
    validate(dataset)
    if base_model.univariate is None:
        raise ValueError("polish needs a two-stage base model with univariate fits")
    yhat = predict(base_model, dataset.features)
    Z, stats = standardize(dataset)
    s, m = stats.sds, stats.means
    a = np.where(stats.constant_mask, 0.0, -m / s)
    b = np.where(stats.constant_mask, 0.0, 1.0 / s)
    problem = SolverProblem(
        design=Z, target=dataset.response, offset=yhat, nonneg=False, family=dataset.family
    )
    lams = lambda_grid(problem, config)
    ppath = fit_path(problem, config, lambdas=lams)
    pcv = kfold_cv(problem, config, lambdas=lams)
    k = pcv.idx_min
    add0, addg = _collapse(a, b, float(ppath.intercepts[k]), ppath.coefs[k])
    model = CollapsedModel(
        gamma0=base_model.gamma0 + add0,
        gammas=base_model.gammas + addg,
        thetas=ppath.coefs[k].copy(),
        univariate=base_model.univariate,
        lambda_selected=float(lams[k]),
        family=dataset.family,
        variant_tag="polish",
        feature_names=dataset.feature_names,
    )
    # stitch: base path (collapsed) down to its selected lambda, then the
    # polish path with cumulative coefficients
    beta0, beta = base_model.univariate.intercepts, base_model.univariate.slopes
    sel = int(np.flatnonzero(base_path.lambdas == base_model.lambda_selected)[0])
    base_g = base_path.coefs[: sel + 1] * beta
    base_g0 = base_path.intercepts[: sel + 1] + base_path.coefs[: sel + 1] @ beta0
    pol_g = base_model.gammas + ppath.coefs * b
    pol_g0 = base_model.gamma0 + ppath.intercepts + ppath.coefs @ a
    coefs = np.vstack([base_g, pol_g])
    intercepts = np.concatenate([base_g0, pol_g0])
    stitched = PathSolution(
        lambdas=np.concatenate([base_path.lambdas[: sel + 1], lams]),
        intercepts=intercepts,
        coefs=coefs,
        n_active=np.count_nonzero(coefs, axis=1),
        objective=np.concatenate([base_path.objective[: sel + 1], ppath.objective]),
        nonneg=False,
        family=dataset.family,
    )
    return model, stitched, pcv


def ovr_multiclass(features: np.ndarray, labels: np.ndarray, config: FitConfig | None = None) -> OvrModel:
    """One-vs-rest multiclass: one binomial two-stage fit per class."""
    config = config or FitConfig()
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 3:
        raise ValueError("one-vs-rest needs at least 3 classes; use the binomial family for 2")
    for c in classes:
        count = int((labels == c).sum())
        if count < config.n_folds:
            raise ValueError(
                f"class {c!r} has only {count} members, fewer than n_folds={config.n_folds}; "
                "reduce n_folds"
            )
    models = []
    for c in classes:
        ds = Dataset(features=features, response=(labels == c).astype(np.float64), family=Family.BINOMIAL)
        model, _, _ = unilasso_cv(ds, config)
        models.append(model)
    return OvrModel(classes=classes, models=tuple(models))


def collapsed_path(model: CollapsedModel, path: PathSolution) -> PathSolution:
    """Rewrite a stage-2 (theta) path on the original feature scale.

    Works for any variant whose model carries univariate fits; lasso and
    external paths are already collapsed by their constructors.
    """
    fits = model.univariate
    if fits is None:
        return path
    if model.variant_tag == "no_mag":
        sign = np.sign(fits.slopes)
        s = fits.stats.sds
        a = -sign * fits.stats.means / s
        b = sign / s
        a[fits.stats.constant_mask] = 0.0
        b[fits.stats.constant_mask] = 0.0
    else:
        a, b = fits.intercepts, fits.slopes
    coefs = path.coefs * b
    return PathSolution(
        lambdas=path.lambdas,
        intercepts=path.intercepts + path.coefs @ a,
        coefs=coefs,
        n_active=np.count_nonzero(coefs, axis=1),
        objective=path.objective,
        nonneg=path.nonneg,
        family=path.family,
    )


def predict(model: CollapsedModel, X_new: np.ndarray) -> np.ndarray:
    """Linear predictor gamma_0 + X gamma."""
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.ndim != 2 or X_new.shape[1] != len(model.gammas):
        raise ValueError(f"expected n x {len(model.gammas)} feature matrix, got {X_new.shape}")
    return model.gamma0 + X_new @ model.gammas


def predict_proba(model: CollapsedModel, X_new: np.ndarray) -> np.ndarray:
    if model.family != Family.BINOMIAL:
        raise ValueError("probabilities are defined for the binomial family only")
    return 1.0 / (1.0 + np.exp(-predict(model, X_new)))


def predict_ovr(ovr: OvrModel, X_new: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Class predictions and the n x K per-class probability matrix.

    Probabilities come from independent sigmoids and need not sum to 1;
    ties go to the lowest class index.
    """
    probs = np.column_stack([predict_proba(m, X_new) for m in ovr.models])
    return ovr.classes[np.argmax(probs, axis=1)], probs


def model_to_json(model: CollapsedModel) -> str:
    """Serialize; float repr is shortest-round-trip so finite doubles survive."""
    doc = {
        "family": model.family.value,
        "variant_tag": model.variant_tag,
        "gamma0": model.gamma0,
        "gammas": model.gammas.tolist(),
        "lambda_selected": model.lambda_selected,
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "univariate": None
        if model.univariate is None
        else {
            "intercepts": model.univariate.intercepts.tolist(),
            "slopes": model.univariate.slopes.tolist(),
        },
        "thetas": model.thetas.tolist(),
    }
    return json.dumps(doc, indent=2)


def model_from_json(text: str) -> CollapsedModel:
    doc = json.loads(text)
    uni = None
    if doc.get("univariate") is not None:
        from .data_model import StandardizationStats

        p = len(doc["gammas"])
        uni = UnivariateFits(
            intercepts=np.array(doc["univariate"]["intercepts"]),
            slopes=np.array(doc["univariate"]["slopes"]),
            insample_fits=np.empty((0, p)),
            loo_fits=None,
            stats=StandardizationStats(
                means=np.zeros(p), sds=np.ones(p), constant_mask=np.zeros(p, dtype=bool)
            ),
            family=Family(doc["family"]),
        )
    return CollapsedModel(
        gamma0=float(doc["gamma0"]),
        gammas=np.array(doc["gammas"], dtype=np.float64),
        thetas=np.array(doc.get("thetas", []), dtype=np.float64),
        univariate=uni,
        lambda_selected=float(doc["lambda_selected"]),
        family=Family(doc["family"]),
        variant_tag=doc["variant_tag"],
        feature_names=tuple(doc["feature_names"]) if doc.get("feature_names") else None,
    )
