"""Two-stage sparse regression.

Stage one fits a separate univariate model per feature and records each
feature's leave-one-out fitted values.  Stage two runs a non-negative,
unstandardized lasso (with intercept) on those fitted-value columns and the
result collapses back to a single linear model in the original features.
"""

from ._kernel import IS_COMPILED, KERNEL_NAME
from .cv import CvResult, cv_error_at_selected, fold_ids, kfold_cv
from .data_model import (
    Dataset,
    Family,
    FitConfig,
    StandardizationStats,
    ValidationError,
    load_csv,
    standardize,
    validate,
)
from .pipeline import (
    CollapsedModel,
    ExternalScores,
    OvrModel,
    adaptive_lasso_path,
    collapsed_path,
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
from .simulate import (
    Metrics,
    evaluate,
    gen_counter_example,
    gen_external_scenario,
    gen_homecourt,
    gen_snr_scenario,
    gen_two_class,
    matching_lasso,
    stability,
)
from .solver import PathSolution, SingleSolution, SolverError, SolverProblem, fit_path, lambda_grid, lambda_max, solve_at
from .univariate import UnivariateFits, fit_stage1, loo_correlation_threshold
from .verify import CheckResult, GuardrailError, run_checks

__version__ = "0.1.0"

__all__ = [
    "CheckResult",
    "CollapsedModel",
    "CvResult",
    "Dataset",
    "ExternalScores",
    "Family",
    "FitConfig",
    "GuardrailError",
    "IS_COMPILED",
    "KERNEL_NAME",
    "Metrics",
    "OvrModel",
    "PathSolution",
    "SingleSolution",
    "SolverError",
    "SolverProblem",
    "StandardizationStats",
    "UnivariateFits",
    "ValidationError",
    "adaptive_lasso_path",
    "collapsed_path",
    "cv_error_at_selected",
    "evaluate",
    "fit_path",
    "fit_stage1",
    "fold_ids",
    "gen_counter_example",
    "gen_external_scenario",
    "gen_homecourt",
    "gen_snr_scenario",
    "gen_two_class",
    "kfold_cv",
    "lambda_grid",
    "lambda_max",
    "lasso_cv",
    "load_csv",
    "loo_correlation_threshold",
    "matching_lasso",
    "model_from_json",
    "model_to_json",
    "ovr_multiclass",
    "polish",
    "predict",
    "predict_ovr",
    "predict_proba",
    "run_checks",
    "solve_at",
    "stability",
    "standardize",
    "unilasso_cv",
    "unilasso_external",
    "unireg",
    "unireg_bootstrap_ci",
    "validate",
    "variant_fit",
]
