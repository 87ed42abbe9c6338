"""Acceptance suite: one test per criterion, run `pytest -v tests/test_acceptance.py`
for one pass/fail line each.  Each test asserts both the numerical criterion
and its wall-clock budget."""

import time

import numpy as np
import pytest

from unilasso import (
    Dataset,
    Family,
    FitConfig,
    SolverProblem,
    adaptive_lasso_path,
    collapsed_path,
    fit_path,
    fit_stage1,
    gen_counter_example,
    gen_homecourt,
    gen_snr_scenario,
    lambda_grid,
    lambda_max,
    lasso_cv,
    polish,
    solve_at,
    unilasso_cv,
    unireg,
    variant_fit,
)
from unilasso.cli import main
from unilasso.oracle import loo_refit_oracle, projected_gradient_oracle
from unilasso.solver import kkt_max_violation

from conftest import TIGHT, gaussian_dataset


class Budget:
    def __init__(self, seconds: float):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        if exc[0] is None:
            elapsed = time.perf_counter() - self.t0
            assert elapsed < self.seconds, f"took {elapsed:.2f}s, budget {self.seconds}s"


def test_01_loo_fits_exact_vs_refit_oracle():
    with Budget(1.0):
        for seed in range(20):
            d = gaussian_dataset(seed, n=40, p=5)
            Z, fits = fit_stage1(d, FitConfig())
            oracle = loo_refit_oracle(Z, d.response, Family.GAUSSIAN)
            assert np.max(np.abs(fits.loo_fits - oracle)) < 1e-8


def test_02_solver_vs_projected_gradient_and_kkt():
    with Budget(5.0):
        rng = np.random.default_rng(0)
        n, p = 30, 8
        D = rng.standard_normal((n, p))
        y = D[:, :3] @ np.array([1.5, -1.0, 0.8]) + 0.4 * rng.standard_normal(n)
        for nonneg in (True, False):
            prob = SolverProblem(design=D, target=y, nonneg=nonneg)
            lams = lambda_grid(prob, FitConfig(n_lambda=5, lambda_min_ratio=1e-2))
            for lam in lams:
                sol = solve_at(prob, lam, config=TIGHT)
                t0_pg, th_pg = projected_gradient_oracle(prob, lam)

                def obj(t0, th):
                    r = y - t0 - D @ th
                    pen = th.sum() if nonneg else np.abs(th).sum()
                    return 0.5 * np.mean(r * r) + lam * pen

                ref = obj(t0_pg, th_pg)
                assert abs(obj(sol.intercept, sol.coefs) - ref) / max(abs(ref), 1e-12) < 1e-6
                assert kkt_max_violation(prob, sol.intercept, sol.coefs, lam) < 1e-6


def test_03_orthonormal_closed_forms():
    with Budget(1.0):
        rng = np.random.default_rng(1)
        n, p = 400, 10
        A = rng.standard_normal((n, p))
        A -= A.mean(axis=0)
        Q, _ = np.linalg.qr(A)
        X = Q * np.sqrt(n)  # mean ~0, population variance 1, (1/n) X'X = I
        X -= X.mean(axis=0)
        beta = rng.standard_normal(p) * 2
        y = X @ beta
        d = Dataset(X, y)
        beta_hat = (X * y[:, None]).mean(axis=0)

        # two-stage (no LOO): collapsed coefs = beta_hat * (1 - lam / beta_hat^2)_+
        cfg = TIGHT.with_(loo=False, n_lambda=30)
        model, _, path = variant_fit(d, cfg)
        cpath = collapsed_path(model, path)
        for k, lam in enumerate(path.lambdas):
            expected = beta_hat * np.maximum(1.0 - lam / beta_hat**2, 0.0)
            assert np.max(np.abs(cpath.coefs[k] - expected)) < 1e-4

        # plain lasso: soft thresholding of beta_hat
        prob = SolverProblem(design=X, target=y, nonneg=False)
        lams = lambda_grid(prob, TIGHT.with_(n_lambda=30))
        lpath = fit_path(prob, TIGHT, lambdas=lams)
        for k, lam in enumerate(lams):
            expected = np.sign(beta_hat) * np.maximum(np.abs(beta_hat) - lam, 0.0)
            assert np.max(np.abs(lpath.coefs[k] - expected)) < 1e-4


def test_04_no_loo_equals_sign_constrained_adaptive_lasso():
    with Budget(5.0):
        from unilasso.pipeline import _stage2_columns

        for seed in range(10):
            d = gaussian_dataset(seed + 100, n=50, p=10)
            for sign in (True, False):
                cfg = FitConfig(tol=1e-16, loo=False, sign_constraint=sign, n_lambda=30)
                Z, fits = fit_stage1(d, cfg)
                design, a, b = _stage2_columns(fits, Z, d, cfg)
                prob = SolverProblem(design=design, target=d.response, nonneg=sign)
                path = fit_path(prob, cfg)
                gammas_two_stage = path.coefs * b[None, :]
                ints_two_stage = path.intercepts + path.coefs @ a
                ints, gammas = adaptive_lasso_path(d, path.lambdas, cfg, sign_constrained=sign)
                assert np.max(np.abs(gammas_two_stage - gammas)) < 1e-6
                assert np.max(np.abs(ints_two_stage - ints)) < 1e-6


def test_05_sign_invariant_never_violated():
    violations = 0
    for seed in range(20):
        d = gaussian_dataset(seed + 200, n=60, p=12, k=4)
        model, _, path = unilasso_cv(d, FitConfig(tol=1e-12))
        slopes = model.univariate.slopes
        violations += int(np.any(model.gammas * slopes < 0))
        # the whole path respects signs, not just the selected point
        cpath = collapsed_path(model, path)
        violations += int(np.any(cpath.coefs * slopes[None, :] < 0))
    assert violations == 0


def test_06_homecourt_dominates_lasso():
    with Budget(120.0):
        sup_u, sup_l, fpr_u, fpr_l, mse_u, mse_l = [], [], [], [], [], []
        for rep in range(20):
            train, test, eff = gen_homecourt(seed=rep, n_test=2000)
            truth = eff != 0
            for fit, sups, fprs, mses in (
                (unilasso_cv, sup_u, fpr_u, mse_u),
                (lasso_cv, sup_l, fpr_l, mse_l),
            ):
                model, _, _ = fit(train, FitConfig(seed=rep))
                sel = model.gammas != 0
                sups.append(sel.sum())
                denom = max((~truth).sum(), 1)
                fprs.append((sel & ~truth).sum() / denom)
                pred = model.gamma0 + test.features @ model.gammas
                mses.append(np.mean((test.response - pred) ** 2))
        assert np.mean(sup_u) < np.mean(sup_l)
        assert np.mean(fpr_u) <= 0.5 * np.mean(fpr_l)
        assert np.mean(mse_u) <= 1.1 * np.mean(mse_l)


def test_07_loo_shrinks_support_vs_lasso_and_no_loo():
    with Budget(300.0):
        sup_loo, sup_noloo, sup_lasso = [], [], []
        for seed in range(10):
            train, _, _ = gen_snr_scenario(150, 300, "medium", seed=seed, n_test=10)
            cfg = FitConfig(seed=seed)
            m_loo, _, _ = unilasso_cv(train, cfg)
            m_noloo, _, _ = variant_fit(train, cfg.with_(loo=False))
            m_lasso, _, _ = lasso_cv(train, cfg)
            sup_loo.append(len(m_loo.support))
            sup_noloo.append(len(m_noloo.support))
            sup_lasso.append(len(m_lasso.support))
        assert np.mean(sup_loo) < np.mean(sup_lasso)
        assert np.mean(sup_loo) < np.mean(sup_noloo)


def test_08_counter_example_hurts_two_stage_polish_recovers():
    with Budget(60.0):
        mse_u, mse_l, mse_p = [], [], []
        for seed in range(20):
            train, test, _ = gen_counter_example(seed=seed, n_test=2000)
            cfg = FitConfig(seed=seed)
            uni, _, upath = unilasso_cv(train, cfg)
            las, _, _ = lasso_cv(train, cfg)
            pol, _, _ = polish(train, uni, upath, cfg)
            for model, acc in ((uni, mse_u), (las, mse_l), (pol, mse_p)):
                pred = model.gamma0 + test.features @ model.gammas
                acc.append(np.mean((test.response - pred) ** 2))
        assert np.mean(mse_u) / np.mean(mse_l) >= 1.5
        assert np.mean(mse_p) / np.mean(mse_l) <= 1.2


def test_09_loo_sign_flip_point_location():
    with Budget(10.0):
        # construct pairs with exact in-sample correlation r and find where the
        # LOO-fit correlation with y crosses zero; average over draws of x
        n = 300
        rng = np.random.default_rng(0)
        grid = np.linspace(0.02, 0.16, 29)
        mean_loo = np.zeros_like(grid)
        for rep in range(40):
            x = rng.standard_normal(n)
            z = rng.standard_normal(n)
            x = (x - x.mean()) / x.std()
            z -= z.mean()
            z -= x * (x @ z) / (x @ x)  # orthogonal to x in sample
            z /= z.std()
            for gi, r in enumerate(grid):
                y = r * x + np.sqrt(1 - r * r) * z  # sample corr(x, y) = r exactly
                _, fits = fit_stage1(Dataset(x[:, None], y), FitConfig())
                mean_loo[gi] += np.corrcoef(fits.loo_fits[:, 0], y)[0, 1]
        mean_loo /= 40
        sign_change = np.flatnonzero(np.diff(np.sign(mean_loo)))
        assert len(sign_change) >= 1
        k = sign_change[0]
        # linear interpolation for the crossing point
        flip = grid[k] + (grid[k + 1] - grid[k]) * (-mean_loo[k]) / (mean_loo[k + 1] - mean_loo[k])
        assert 0.04 <= flip <= 0.12


def test_10_unireg_beats_ols_with_sparse_support():
    with Budget(120.0):
        mse_uni, mse_ols, sups = [], [], []
        for seed in range(10):
            train, test, _ = gen_snr_scenario(300, 100, "medium", seed=seed, n_test=2000)
            model = unireg(train, FitConfig(seed=seed))
            pred = model.gamma0 + test.features @ model.gammas
            mse_uni.append(np.mean((test.response - pred) ** 2))
            A = np.column_stack([np.ones(train.n), train.features])
            coef, *_ = np.linalg.lstsq(A, train.response, rcond=None)
            pred_ols = coef[0] + test.features @ coef[1:]
            mse_ols.append(np.mean((test.response - pred_ols) ** 2))
            sups.append(len(model.support))
        assert np.mean(mse_uni) <= np.mean(mse_ols)
        assert np.mean(sups) <= 0.3 * 100


def test_11_binomial_approx_loo_close_to_refits():
    with Budget(30.0):
        for seed in range(10):
            rng = np.random.default_rng(seed + 300)
            n, p = 60, 3
            X = rng.standard_normal((n, p))
            eta = 1.0 * X[:, 0] - 0.7 * X[:, 1]
            y = (rng.uniform(size=n) < 1 / (1 + np.exp(-eta))).astype(float)
            if y.min() == y.max():
                y[0] = 1 - y[0]
            d = Dataset(X, y, family=Family.BINOMIAL)
            Z, fits = fit_stage1(d, FitConfig())
            oracle = loo_refit_oracle(Z, y, Family.BINOMIAL)
            assert np.max(np.abs(fits.loo_fits - oracle)) <= 0.05


def test_12_cli_byte_identical_given_seed(tmp_path):
    import csv

    d = gaussian_dataset(42, n=50, p=5)
    data = tmp_path / "train.csv"
    with open(data, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(d.p)] + ["y"])
        for i in range(d.n):
            w.writerow(list(d.features[i]) + [d.response[i]])
    for prefix in ("r1", "r2"):
        rc = main(["fit", "--input", str(data), "--response", "y",
                   "--output-prefix", str(tmp_path / prefix), "--seed", "13"])
        assert rc == 0
        rc = main(["cv", "--input", str(data), "--response", "y",
                   "--output-prefix", str(tmp_path / (prefix + "c")), "--seed", "13"])
        assert rc == 0
    for a, b in (("r1.model.json", "r2.model.json"), ("r1.path.csv", "r2.path.csv"),
                 ("r1c.cv.csv", "r2c.cv.csv"), ("r1c.model.json", "r2c.model.json")):
        assert (tmp_path / a).read_bytes() == (tmp_path / b).read_bytes()
