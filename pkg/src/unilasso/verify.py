"""Cross-checks of the fast paths against the shipped oracles.

Used by the CLI `verify` subcommand to build trust on user data: closed-form
LOO vs explicit refits, coordinate descent vs projected gradient, KKT
residuals, and the adaptive-lasso reparameterization identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import Dataset, Family, FitConfig, standardize, validate
from .oracle import LOO_N_GUARD, PG_Q_GUARD, loo_refit_oracle, projected_gradient_oracle
from .pipeline import adaptive_lasso_path, variant_fit
from .solver import SolverProblem, fit_path, kkt_max_violation, lambda_grid
from .univariate import fit_stage1

__all__ = ["CheckResult", "run_checks", "GuardrailError"]


class GuardrailError(ValueError):
    """Data too large for the slow oracles."""


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.value <= self.threshold


def run_checks(dataset: Dataset, config: FitConfig | None = None, solver_tol: float | None = None) -> list[CheckResult]:
    """Run every applicable oracle check; returns one result per check.

    solver_tol loosens the checked solver's tolerance (testing hook for
    demonstrating that the KKT check catches a sloppy solve).
    """
    config = config or FitConfig()
    validate(dataset)
    n, p = dataset.n, dataset.p
    if n > LOO_N_GUARD:
        raise GuardrailError(
            f"n={n} exceeds the refit-oracle guardrail ({LOO_N_GUARD}); subsample the data first"
        )
    if p > PG_Q_GUARD:
        raise GuardrailError(
            f"p={p} exceeds the projected-gradient guardrail ({PG_Q_GUARD}); subset the features first"
        )
    results = []
    Z, fits = fit_stage1(dataset, config)
    exact = loo_refit_oracle(Z, dataset.response, dataset.family)
    loo_gap = float(np.abs(fits.loo_fits - exact).max())
    if dataset.family == Family.BINOMIAL:
        results.append(CheckResult("approximate LOO vs refit oracle (linear predictor)", loo_gap, 0.05))
        return results
    results.append(CheckResult("closed-form LOO vs refit oracle", loo_gap, 1e-8))

    solve_cfg = config if solver_tol is None else config.with_(tol=solver_tol)
    design = np.asfortranarray(fits.loo_fits.copy())
    design[:, fits.stats.constant_mask] = 0.0
    problem = SolverProblem(design=design, target=dataset.response, nonneg=True)
    lams = lambda_grid(problem, solve_cfg.with_(n_lambda=max(solve_cfg.n_lambda, 5)))
    probe = lams[np.linspace(0, len(lams) - 1, 5).astype(int)]
    path = fit_path(problem, solve_cfg, lambdas=probe)
    obj_gap = 0.0
    kkt = 0.0
    w = problem.norm_weights()
    for k, lam in enumerate(probe):
        t0, th = projected_gradient_oracle(problem, lam)
        r_o = problem.target - t0 - problem.design @ th
        obj_oracle = 0.5 * (w @ (r_o * r_o)) / n + lam * th.sum()
        rel = abs(path.objective[k] - obj_oracle) / max(1.0, abs(obj_oracle))
        obj_gap = max(obj_gap, rel)
        kkt = max(kkt, kkt_max_violation(problem, float(path.intercepts[k]), path.coefs[k], float(lam)))
    results.append(CheckResult("coordinate descent vs projected-gradient objective (relative)", obj_gap, 1e-6))
    results.append(CheckResult("KKT residual along the path", kkt, 1e-6))

    eq_cfg = solve_cfg.with_(loo=False, sign_constraint=True)
    _, _, vpath = variant_fit(dataset, eq_cfg)
    _, agammas = adaptive_lasso_path(dataset, vpath.lambdas, eq_cfg, sign_constrained=True)
    collapsed = vpath.coefs * fits.slopes
    results.append(
        CheckResult("two-stage vs sign-constrained adaptive lasso", float(np.abs(collapsed - agammas).max()), 1e-6)
    )
    return results
