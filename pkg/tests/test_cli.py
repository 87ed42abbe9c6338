import csv
import json

import numpy as np
import pytest

from unilasso import predict
from unilasso.cli import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main

from conftest import gaussian_dataset


@pytest.fixture
def train_csv(tmp_path):
    d = gaussian_dataset(0, n=60, p=6)
    path = tmp_path / "train.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(d.p)] + ["y"])
        for i in range(d.n):
            w.writerow(list(d.features[i]) + [d.response[i]])
    return path


def _fit(train_csv, tmp_path, prefix, extra=()):
    return main(
        ["fit", "--input", str(train_csv), "--response", "y",
         "--output-prefix", str(tmp_path / prefix), "--seed", "7", *extra]
    )


def test_fit_outputs_and_determinism(train_csv, tmp_path, capsys):
    assert _fit(train_csv, tmp_path, "a") == EXIT_OK
    assert _fit(train_csv, tmp_path, "b") == EXIT_OK
    for suffix in (".model.json", ".path.csv"):
        a = (tmp_path / ("a" + suffix)).read_bytes()
        b = (tmp_path / ("b" + suffix)).read_bytes()
        assert a == b  # byte-identical for a fixed seed
    model = json.loads((tmp_path / "a.model.json").read_text())
    assert {"family", "gamma0", "gammas", "variant_tag"} <= model.keys()
    out = capsys.readouterr().out
    assert "selected lambda" in out


def test_predict_round_trip(train_csv, tmp_path):
    _fit(train_csv, tmp_path, "m")
    out = tmp_path / "pred.csv"
    rc = main(
        ["predict", "--model", str(tmp_path / "m.model.json"),
         "--input", str(train_csv), "--response", "y", "--output", str(out)]
    )
    assert rc == EXIT_OK
    preds = np.loadtxt(out, skiprows=1)
    from unilasso import model_from_json

    model = model_from_json((tmp_path / "m.model.json").read_text())
    d = gaussian_dataset(0, n=60, p=6)
    assert np.allclose(preds, predict(model, d.features), atol=1e-12)


def test_cv_writes_curve_with_seed_header(train_csv, tmp_path):
    rc = main(
        ["cv", "--input", str(train_csv), "--response", "y",
         "--output-prefix", str(tmp_path / "c"), "--seed", "3", "--n-folds", "5"]
    )
    assert rc == EXIT_OK
    lines = (tmp_path / "c.cv.csv").read_text().splitlines()
    assert lines[0].startswith("# seed=3")
    assert lines[1] == "lambda,cv_mean,cv_se,n_active"


def test_io_error_exit_code(tmp_path, capsys):
    rc = main(["fit", "--input", str(tmp_path / "missing.csv"), "--response", "y",
               "--output-prefix", str(tmp_path / "x")])
    assert rc == EXIT_IO


def test_validation_error_exit_code(train_csv, tmp_path, capsys):
    rc = main(["fit", "--input", str(train_csv), "--response", "nope",
               "--output-prefix", str(tmp_path / "x")])
    assert rc == EXIT_VALIDATION


def test_conflicting_variant_flags_rejected(train_csv, tmp_path):
    scores = tmp_path / "scores.csv"
    scores.write_text("slope\n" + "\n".join(["1.0"] * 6) + "\n")
    rc = main(["fit", "--input", str(train_csv), "--response", "y",
               "--output-prefix", str(tmp_path / "x"),
               "--external-scores", str(scores), "--no-loo"])
    assert rc == EXIT_VALIDATION


def test_simulate_metrics_csv(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    rc = main(["simulate", "--scenario", "counter_example", "--replicates", "2",
               "--seed", "1", "--methods", "lasso,unilasso", "--n-test", "500",
               "--output", str(out)])
    assert rc == EXIT_OK
    rows = out.read_text().splitlines()
    assert rows[0] == "seed,method,mse,support,tpr,fpr"
    assert len(rows) == 5  # header + 2 replicates x 2 methods
    assert "mse_ratio_vs_lasso" in capsys.readouterr().out


def test_simulate_unknown_scenario(tmp_path):
    rc = main(["simulate", "--scenario", "bogus", "--seed", "1",
               "--output", str(tmp_path / "x.csv")])
    assert rc == EXIT_VALIDATION


def test_verify_subcommand_pass_and_fault_injection(train_csv, capsys):
    rc = main(["verify", "--input", str(train_csv), "--response", "y",
               "--n-lambda", "20", "--tol", "1e-14"])
    assert rc == EXIT_OK
    assert "[PASS]" in capsys.readouterr().out
    rc = main(["verify", "--input", str(train_csv), "--response", "y",
               "--n-lambda", "20", "--tol", "1e-14", "--solver-tol", "1e-2"])
    assert rc == EXIT_NUMERICAL
    assert "[FAIL]" in capsys.readouterr().out


def test_bench_subcommand(capsys):
    rc = main(["bench", "--n", "50", "--p", "15", "--n-lambda", "10", "--repeats", "1"])
    assert rc == EXIT_OK
    assert "kernel" in capsys.readouterr().out


def test_unireg_with_bootstrap(train_csv, tmp_path, capsys):
    rc = main(["unireg", "--input", str(train_csv), "--response", "y",
               "--output-prefix", str(tmp_path / "u"), "--bootstrap", "100"])
    assert rc == EXIT_OK
    lines = (tmp_path / "u.ci.csv").read_text().splitlines()
    assert lines[0] == "feature,estimate,lower,upper"
    assert len(lines) == 7


def test_polish_subcommand(train_csv, tmp_path):
    rc = main(["polish", "--input", str(train_csv), "--response", "y",
               "--output-prefix", str(tmp_path / "p")])
    assert rc == EXIT_OK
    assert (tmp_path / "p.model.json").exists()
    assert (tmp_path / "p.path.csv").exists()
