import json

import numpy as np
import pytest

from unilasso import (
    Dataset,
    ExternalScores,
    Family,
    FitConfig,
    adaptive_lasso_path,
    collapsed_path,
    fit_stage1,
    lasso_cv,
    model_from_json,
    model_to_json,
    ovr_multiclass,
    polish,
    predict,
    predict_ovr,
    predict_proba,
    unilasso_cv,
    unilasso_external,
    unireg,
    unireg_bootstrap_ci,
    variant_fit,
)
from unilasso.solver import SolverProblem, fit_path

from conftest import TIGHT, binomial_dataset, gaussian_dataset


def test_collapse_reproduces_stage2_predictions():
    # gamma0 + X @ gamma must equal theta0 + F @ theta, where F_ij are the
    # per-feature fitted values b0_j + b_j x_ij and theta0 = gamma0 - b0 @ theta
    d = gaussian_dataset(0, n=50, p=6)
    model, cv, path = unilasso_cv(d, TIGHT)
    fits = model.univariate
    F = fits.intercepts[None, :] + d.features * fits.slopes[None, :]
    theta0 = model.gamma0 - fits.intercepts @ model.thetas
    lhs = model.gamma0 + d.features @ model.gammas
    rhs = theta0 + F @ model.thetas
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_sign_invariant_holds():
    # collapsed coefficients never oppose the univariate slopes
    for seed in range(10):
        d = gaussian_dataset(seed, n=40, p=10, k=4)
        model, _, _ = unilasso_cv(d, FitConfig(tol=1e-12))
        prod = model.gammas * model.univariate.slopes
        assert np.all(prod >= 0.0)


def test_constant_feature_gets_zero_coefficient():
    d = gaussian_dataset(1, n=40, p=5)
    X = d.features.copy()
    X[:, 2] = 4.2
    model, _, _ = unilasso_cv(Dataset(X, d.response), FitConfig())
    assert model.gammas[2] == 0.0


def test_no_loo_matches_sign_constrained_adaptive_lasso():
    # two-stage without LOO == adaptive lasso with pf = 1/|betahat| on raw X,
    # sign-constrained; compare collapsed coefficients on the shared grid
    for seed in range(3):
        d = gaussian_dataset(seed + 20, n=50, p=10)
        cfg = FitConfig(loo=False, tol=1e-16, n_lambda=30)
        model, _, path = variant_fit(d, cfg)
        cpath = collapsed_path(model, path)
        ints, gammas = adaptive_lasso_path(d, path.lambdas, cfg, sign_constrained=True)
        assert np.max(np.abs(cpath.coefs - gammas)) < 1e-6
        assert np.max(np.abs(cpath.intercepts - ints)) < 1e-6


def test_no_mag_variant_uses_only_signs():
    d = gaussian_dataset(5, n=60, p=8)
    cfg = FitConfig(use_magnitude=False, tol=1e-12)
    model, _, _ = variant_fit(d, cfg)
    assert model.variant_tag == "no_mag"
    # collapsed coefficients still respect univariate signs
    assert np.all(model.gammas * model.univariate.slopes >= 0.0)


def test_no_sign_variant_can_go_negative():
    d = gaussian_dataset(6)
    cfg = FitConfig(sign_constraint=False, tol=1e-12)
    model, _, _ = variant_fit(d, cfg)
    assert model.variant_tag in ("no_sign", "adaptive")


def test_external_scores_mode():
    d = gaussian_dataset(7, n=60, p=6)
    _, fits = fit_stage1(d, FitConfig())
    scores = ExternalScores(slopes=fits.slopes, intercepts=fits.intercepts)
    model, cv, path = unilasso_external(d, scores, FitConfig(tol=1e-12))
    assert model.variant_tag == "external"
    assert np.all(model.gammas * np.where(scores.slopes == 0, 0, scores.slopes) >= 0)
    # missing intercepts default to zero
    model2, _, _ = unilasso_external(d, ExternalScores(slopes=fits.slopes), FitConfig())
    assert model2.gammas.shape == (6,)


def test_unireg_solves_nonneg_least_squares_on_loo_columns():
    # lambda -> 0: stage-2 thetas solve non-negative least squares on the
    # LOO columns, so the KKT conditions at lambda = 0 must hold
    from unilasso.solver import kkt_max_violation

    d = gaussian_dataset(8, n=80, p=5)
    model = unireg(d, TIGHT)
    _, fits = fit_stage1(d, TIGHT)
    prob = SolverProblem(design=np.asfortranarray(fits.loo_fits), target=d.response, nonneg=True)
    theta0 = model.gamma0 - fits.intercepts @ model.thetas
    assert kkt_max_violation(prob, theta0, model.thetas, 0.0) < 1e-6


def test_unireg_bootstrap_ci_shape_and_coverage_of_estimate():
    d = gaussian_dataset(9, n=60, p=4)
    cfg = FitConfig(seed=5)
    ci = unireg_bootstrap_ci(d, cfg, n_boot=100)
    assert ci.shape == (4, 2)
    assert np.all(ci[:, 0] <= ci[:, 1])
    with pytest.raises(ValueError):
        unireg_bootstrap_ci(d, cfg, n_boot=50)


def test_polish_stitched_path_starts_at_base():
    d = gaussian_dataset(10, n=60, p=8)
    cfg = FitConfig(tol=1e-12)
    base_model, _, base_path = unilasso_cv(d, cfg)
    model, stitched, pcv = polish(d, base_model, base_path, cfg)
    cbase = collapsed_path(base_model, base_path)
    assert np.allclose(stitched.coefs[0], cbase.coefs[0], atol=1e-12)
    # polish predictions = base predictions + lasso correction; at the
    # selected point the training MSE cannot exceed the base fit's
    base_mse = np.mean((d.response - base_model.gamma0 - d.features @ base_model.gammas) ** 2)
    pol_mse = np.mean((d.response - model.gamma0 - d.features @ model.gammas) ** 2)
    assert pol_mse <= base_mse + 1e-10


def test_lasso_cv_unconstrained_and_standardized():
    d = gaussian_dataset(11, n=60, p=6)
    model, cv, path = lasso_cv(d, FitConfig(tol=1e-12))
    assert model.variant_tag == "lasso"
    assert model.univariate is None
    pred = predict(model, d.features)
    assert pred.shape == (60,)


def test_json_round_trip_exact():
    d = gaussian_dataset(12)
    model, _, _ = unilasso_cv(d, FitConfig())
    blob = model_to_json(model)
    json.loads(blob)  # valid JSON
    back = model_from_json(blob)
    assert back.gamma0 == model.gamma0
    assert np.array_equal(back.gammas, model.gammas)
    assert back.family == model.family and back.variant_tag == model.variant_tag
    X = d.features
    assert np.array_equal(predict(model, X), predict(back, X))


def test_binomial_pipeline_and_predict_proba(small_binomial):
    model, cv, _ = unilasso_cv(small_binomial, FitConfig(n_lambda=30))
    prob = predict_proba(model, small_binomial.features)
    assert np.all((prob >= 0) & (prob <= 1))
    assert cv.cv_misclass_mean is not None


def test_ovr_multiclass_predicts_all_classes():
    rng = np.random.default_rng(0)
    n_per, p = 60, 5
    X, labels = [], []
    for c, shift in enumerate((-2.0, 0.0, 2.0)):
        Xc = rng.standard_normal((n_per, p))
        Xc[:, 0] += shift
        X.append(Xc)
        labels += [c] * n_per
    X = np.vstack(X)
    labels = np.array(labels)
    ovr = ovr_multiclass(X, labels, FitConfig(n_lambda=30))
    pred, proba = predict_ovr(ovr, X)
    assert proba.shape == (3 * n_per, 3)
    assert np.mean(pred == labels) > 0.6


def test_strict_cv_runs_and_selects():
    d = gaussian_dataset(13, n=50, p=6)
    model, cv, _ = unilasso_cv(d, FitConfig(n_lambda=20), strict_cv=True)
    assert np.isfinite(cv.cv_mean).all()
    assert len(model.gammas) == 6
