"""Command-line front end.

CSV in, JSON/CSV out.  Plot-ready curve dumps are data files; rendering is
left to external tools.  Exit codes: 0 ok, 2 I/O, 3 validation, 4 numerical.
All commands are deterministic given identical arguments and seed.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import KERNEL_NAME
from .bench import run_benchmark
from .cv import CvResult
from .data_model import Dataset, Family, FitConfig, ValidationError, load_csv
from .pipeline import (
    CollapsedModel,
    ExternalScores,
    collapsed_path,
    lasso_cv,
    model_from_json,
    model_to_json,
    polish,
    predict,
    predict_proba,
    unilasso_cv,
    unireg,
    unireg_bootstrap_ci,
    unilasso_external,
    variant_fit,
)
from .simulate import (
    SCENARIO_NAMES,
    evaluate,
    gen_counter_example,
    gen_homecourt,
    gen_snr_scenario,
    gen_two_class,
    matching_lasso,
)
from .solver import PathSolution, SolverError
from .verify import GuardrailError, run_checks

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3, 4


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _add_data_args(p: argparse.ArgumentParser):
    p.add_argument("--input", required=True, help="input CSV with a header row")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--response", help="response column name")
    g.add_argument("--response-index", type=int, help="zero-based response column index")
    p.add_argument("--family", choices=["gaussian", "binomial"], default="gaussian")


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--n-lambda", type=int, default=100)
    p.add_argument("--lambda-min-ratio", type=float, default=None)
    p.add_argument("--n-folds", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="worker hint; env UNILASSO_THREADS otherwise")


def _add_variant_args(p: argparse.ArgumentParser):
    p.add_argument("--no-loo", action="store_true", help="use in-sample univariate fits in stage 2")
    p.add_argument("--no-sign", action="store_true", help="drop the non-negativity constraint")
    p.add_argument("--no-mag", action="store_true", help="use only univariate signs in stage 2")
    p.add_argument("--external-scores", help="CSV of external univariate scores (columns: slope[,intercept])")
    p.add_argument("--strict-cv", action="store_true", help="refit stage 1 inside every CV fold")


def _config(args) -> FitConfig:
    return FitConfig(
        n_lambda=args.n_lambda,
        lambda_min_ratio=args.lambda_min_ratio,
        n_folds=args.n_folds,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
        loo=not getattr(args, "no_loo", False),
        sign_constraint=not getattr(args, "no_sign", False),
        use_magnitude=not getattr(args, "no_mag", False),
    )


def _threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        return args.threads
    return int(os.environ.get("UNILASSO_THREADS", "1"))


def _dataset(args) -> Dataset:
    return load_csv(
        args.input,
        response=args.response,
        response_index=args.response_index,
        family=Family(args.family),
    )


def _check_variant_flags(args):
    if args.external_scores and (args.no_loo or args.no_mag):
        raise ValidationError("--external-scores cannot be combined with --no-loo/--no-mag")
    if args.strict_cv and args.external_scores:
        raise ValidationError("--strict-cv does not apply to external scores")


def _load_scores(path) -> ExternalScores:
    import csv as _csv

    with open(path, newline="") as fh:
        rows = list(_csv.reader(fh))
    header = [h.strip().lower() for h in rows[0]]
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    if "slope" not in header:
        raise ValidationError(f"{path}: external scores need a 'slope' column")
    slopes = body[:, header.index("slope")]
    intercepts = body[:, header.index("intercept")] if "intercept" in header else None
    return ExternalScores(slopes=slopes, intercepts=intercepts)


def _write_path_csv(path_file: str, path: PathSolution, names):
    with open(path_file, "w") as fh:
        cols = ["lambda", "df", "objective"] + [f"coef_{nm}" for nm in names]
        fh.write(",".join(cols) + "\n")
        for k in range(len(path)):
            row = [_fmt(path.lambdas[k]), str(int(path.n_active[k])), _fmt(path.objective[k])]
            row += [_fmt(v) for v in path.coefs[k]]
            fh.write(",".join(row) + "\n")


def _write_cv_csv(cv_file: str, cv: CvResult, path: PathSolution, seed: int):
    with open(cv_file, "w") as fh:
        fh.write(f"# seed={seed} n_folds={len(np.unique(cv.fold_assignment))}\n")
        fh.write("lambda,cv_mean,cv_se,n_active\n")
        for k in range(len(cv.lambdas)):
            fh.write(
                f"{_fmt(cv.lambdas[k])},{_fmt(cv.cv_mean[k])},{_fmt(cv.cv_se[k])},{int(path.n_active[k])}\n"
            )


def _names(dataset: Dataset):
    return dataset.feature_names or tuple(f"x{j}" for j in range(dataset.p))


def _summary_table(model: CollapsedModel, names) -> str:
    lines = [f"{'feature':<24}{'univariate coef':>18}{'final coef':>16}"]
    uni = model.univariate.slopes if model.univariate is not None else None
    for j in np.flatnonzero(model.gammas):
        u = f"{uni[j]: .6g}" if uni is not None else ""
        lines.append(f"{names[j]:<24}{u:>18}{model.gammas[j]: >16.6g}")
    if len(lines) == 1:
        lines.append("(null model: no active features)")
    return "\n".join(lines)


def _fit_variant(dataset, config, args):
    if args.external_scores:
        scores = _load_scores(args.external_scores)
        return unilasso_external(dataset, scores, config)
    if config.loo and config.sign_constraint and config.use_magnitude:
        return unilasso_cv(dataset, config, strict_cv=args.strict_cv)
    return variant_fit(dataset, config)


def cmd_fit(args) -> int:
    _check_variant_flags(args)
    dataset = _dataset(args)
    config = _config(args)
    model, cv, path = _fit_variant(dataset, config, args)
    names = _names(dataset)
    with open(args.output_prefix + ".model.json", "w") as fh:
        fh.write(model_to_json(model) + "\n")
    cpath = collapsed_path(model, path)
    _write_path_csv(args.output_prefix + ".path.csv", cpath, names)
    print(_summary_table(model, names))
    print(f"\nselected lambda: {model.lambda_selected!r}  support: {len(model.support)}")
    return EXIT_OK


def cmd_cv(args) -> int:
    _check_variant_flags(args)
    dataset = _dataset(args)
    config = _config(args)
    if dataset.n < config.n_folds:
        raise ValidationError(f"n_folds={config.n_folds} exceeds n={dataset.n}")
    model, cv, path = _fit_variant(dataset, config, args)
    _write_cv_csv(args.output_prefix + ".cv.csv", cv, path, config.seed)
    with open(args.output_prefix + ".model.json", "w") as fh:
        fh.write(model_to_json(model) + "\n")
    print(
        f"lambda_min={cv.lambda_min!r} cv={float(cv.cv_mean[cv.idx_min])!r} "
        f"lambda_1se={cv.lambda_1se!r} support={len(model.support)}"
    )
    return EXIT_OK


def cmd_predict(args) -> int:
    with open(args.model) as fh:
        model = model_from_json(fh.read())
    if args.response or args.response_index is not None:
        dataset = _dataset(args)
        X = dataset.features
    else:
        import csv as _csv

        with open(args.input, newline="") as fh:
            rows = list(_csv.reader(fh))
        X = np.array([[float(v) for v in r] for r in rows[1:]])
    eta = predict(model, X)
    out = sys.stdout if args.output is None else open(args.output, "w")
    try:
        if model.family == Family.BINOMIAL:
            prob = 1.0 / (1.0 + np.exp(-eta))
            out.write("prediction,probability\n")
            for e, pr in zip(eta, prob):
                out.write(f"{_fmt(e)},{_fmt(pr)}\n")
        else:
            out.write("prediction\n")
            for e in eta:
                out.write(f"{_fmt(e)}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_unireg(args) -> int:
    dataset = _dataset(args)
    config = _config(args)
    model = unireg(dataset, config)
    names = _names(dataset)
    with open(args.output_prefix + ".model.json", "w") as fh:
        fh.write(model_to_json(model) + "\n")
    if args.bootstrap:
        ci = unireg_bootstrap_ci(dataset, config, n_boot=args.bootstrap, level=args.level)
        with open(args.output_prefix + ".ci.csv", "w") as fh:
            fh.write("feature,estimate,lower,upper\n")
            for j in range(dataset.p):
                fh.write(f"{names[j]},{_fmt(model.gammas[j])},{_fmt(ci[j, 0])},{_fmt(ci[j, 1])}\n")
    print(_summary_table(model, names))
    return EXIT_OK


def cmd_polish(args) -> int:
    dataset = _dataset(args)
    config = _config(args)
    base_model, _, base_path = unilasso_cv(dataset, config)
    model, stitched, pcv = polish(dataset, base_model, base_path, config)
    names = _names(dataset)
    with open(args.output_prefix + ".model.json", "w") as fh:
        fh.write(model_to_json(model) + "\n")
    _write_path_csv(args.output_prefix + ".path.csv", stitched, names)
    print(_summary_table(model, names))
    return EXIT_OK


def _simulate_replicate(scenario: str, seed: int, methods, n_test: int):
    if scenario in ("low_snr", "medium_snr", "high_snr"):
        level = scenario.split("_")[0]
        train, test, beta = gen_snr_scenario(300, 1000, level, seed, n_test=n_test)
    elif scenario == "homecourt":
        train, test, beta = gen_homecourt(seed=seed, n_test=n_test)
    elif scenario == "two_class":
        train, test, beta = gen_two_class(seed=seed, n_test=n_test)
    elif scenario == "counter_example":
        train, test, beta = gen_counter_example(seed=seed, n_test=n_test)
    else:
        raise ValidationError(f"unknown scenario {scenario!r}; known: {', '.join(SCENARIO_NAMES)}")
    config = FitConfig(seed=seed)
    out = {}
    uni_model = uni_path = None
    if {"unilasso", "polish", "matching"} & set(methods):
        uni_model, _, uni_path = unilasso_cv(train, config)
    for method in methods:
        if method == "lasso":
            model, _, _ = lasso_cv(train, config)
        elif method == "unilasso":
            model = uni_model
        elif method == "polish":
            model, _, _ = polish(train, uni_model, uni_path, config)
        elif method == "adaptive":
            model, _, _ = variant_fit(train, config.with_(loo=False, sign_constraint=False))
        elif method == "matching":
            model = matching_lasso(train, len(uni_model.support), config)
        else:
            raise ValidationError(f"unknown method {method!r}")
        out[method] = evaluate(model, test, beta)
    return out


def cmd_simulate(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    rows = []
    for r in range(args.replicates):
        seed = args.seed + r
        metrics = _simulate_replicate(args.scenario, seed, methods, args.n_test)
        for method in methods:
            m = metrics[method]
            rows.append((seed, method, m.test_mse, m.support, m.tpr, m.fpr))
    with open(args.output, "w") as fh:
        fh.write("seed,method,mse,support,tpr,fpr\n")
        for seed, method, mse, support, tpr, fpr in rows:
            fh.write(f"{seed},{method},{_fmt(mse)},{support},{_fmt(tpr)},{_fmt(fpr)}\n")
    # mean / se summary, one row per method
    print(f"{'method':<12}{'mse':>12}{'se':>12}{'support':>10}{'se':>10}", end="")
    lasso_mean = None
    by_method = {m: [r for r in rows if r[1] == m] for m in methods}
    if "lasso" in methods:
        lasso_mean = float(np.mean([r[2] for r in by_method["lasso"]]))
        print(f"{'mse_ratio_vs_lasso':>20}")
    else:
        print()
    for method in methods:
        sub = by_method[method]
        mses = np.array([r[2] for r in sub], dtype=float)
        sups = np.array([r[3] for r in sub], dtype=float)
        R = len(sub)
        se_m = f"{mses.std(ddof=1) / np.sqrt(R):.4g}" if R > 1 else ""
        se_s = f"{sups.std(ddof=1) / np.sqrt(R):.4g}" if R > 1 else ""
        line = f"{method:<12}{mses.mean():>12.5g}{se_m:>12}{sups.mean():>10.4g}{se_s:>10}"
        if lasso_mean:
            line += f"{mses.mean() / lasso_mean:>20.4g}"
        print(line)
    return EXIT_OK


def cmd_verify(args) -> int:
    dataset = _dataset(args)
    config = _config(args)
    try:
        checks = run_checks(dataset, config, solver_tol=args.solver_tol)
    except GuardrailError as exc:
        raise ValidationError(str(exc)) from exc
    ok = True
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"[{status}] {c.name}: max discrepancy {c.value:.3e} (threshold {c.threshold:.0e})")
        ok = ok and c.passed
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_bench(args) -> int:
    rows, diff = run_benchmark(n=args.n, p=args.p, n_lambda=args.n_lambda, seed=args.seed, repeats=args.repeats)
    print(f"active kernel: {KERNEL_NAME}")
    print(f"{'kernel':<10}{'seconds':>12}")
    for row in rows:
        print(f"{row.kernel:<10}{row.seconds:>12.4f}")
    if diff is not None:
        base = next(r.seconds for r in rows if r.kernel == "python")
        fast = next(r.seconds for r in rows if r.kernel == "compiled")
        print(f"speedup: {base / fast:.1f}x  max coefficient difference: {diff:.3e}")
    else:
        print("compiled kernel unavailable; only the python fallback was timed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unilasso", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit with CV-selected lambda; write model JSON and path CSV")
    _add_data_args(p)
    _add_config_args(p)
    _add_variant_args(p)
    p.add_argument("--output-prefix", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cv", help="cross-validate; write CV curve CSV and selected model")
    _add_data_args(p)
    _add_config_args(p)
    _add_variant_args(p)
    p.add_argument("--output-prefix", required=True)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("predict", help="apply a saved model to new data")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--response", help="response column to drop from the input")
    p.add_argument("--response-index", type=int)
    p.add_argument("--family", choices=["gaussian", "binomial"], default="gaussian")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("unireg", help="unregularized (lambda -> 0) fit, optional bootstrap intervals")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--output-prefix", required=True)
    p.add_argument("--bootstrap", type=int, default=0, help="number of bootstrap resamples")
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_unireg)

    p = sub.add_parser("polish", help="lasso polish of the CV-selected fit; stitched path CSV")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--output-prefix", required=True)
    p.set_defaults(func=cmd_polish)

    p = sub.add_parser("simulate", help="run scenario replicates and emit per-replicate metrics CSV")
    p.add_argument("--scenario", required=True)
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--methods", default="lasso,unilasso,polish,adaptive,matching")
    p.add_argument("--n-test", type=int, default=10_000)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the slow oracles against the fast paths on your data")
    _add_data_args(p)
    _add_config_args(p)
    p.add_argument("--solver-tol", type=float, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="benchmark compiled vs python coordinate-descent kernels")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--p", type=int, default=200)
    p.add_argument("--n-lambda", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if hasattr(args, "threads"):
        os.environ["UNILASSO_THREADS"] = str(_threads(args))
    try:
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
