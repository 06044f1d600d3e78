import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from taulasso import SolverDivergenceError, cli
from taulasso.simbench import generate, scenario


@pytest.fixture
def data_csv(tmp_path):
    d = generate(scenario("scenario1"), 0)[0]
    path = tmp_path / "data.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", *(f"x{j}" for j in range(d.p))])
        for yi, xi in zip(d.y, d.X):
            w.writerow([repr(float(yi)), *(repr(float(v)) for v in xi)])
    return path


def _run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_fit_writes_beta_of_length_p(data_csv, capsys):
    code, out = _run(["fit", "--input", data_csv, "--lambda", 0.1, "--estimator", "tau-lasso"], capsys)
    assert code == 0
    res = json.loads(out.out)
    assert len(res["beta"]) == 10
    for key in ("s", "tau", "lambda", "active_set", "objective", "trace_length", "seed", "config"):
        assert key in res
    assert res["config"]["starts"] == 5 and res["config"]["threads"] == 1


def test_fit_is_byte_identical_across_runs(data_csv, tmp_path):
    outs = []
    for k in range(2):
        target = tmp_path / f"out{k}.json"
        assert cli.main(["fit", "--input", str(data_csv), "--estimator", "adaptive", "--pilot", "s-ridge", "--cv",
                         "--seed", "3", "--output", str(target)]) == 0
        outs.append(target.read_bytes())
    assert outs[0] == outs[1]


def test_cv_command(data_csv, capsys):
    code, out = _run(["cv", "--input", data_csv, "--estimator", "tau-lasso", "--n-lambda", 6], capsys)
    res = json.loads(out.out)
    assert code == 0 and len(res["lambda_grid"]) == 6 and res["best_lambda"] in res["lambda_grid"]


def test_malformed_csv_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("y,x1\n1.0,2.0\n3.0,oops\n")
    code, out = _run(["fit", "--input", bad, "--lambda", 0.1], capsys)
    assert code == 2 and "line 3" in out.err and "column 2" in out.err


@pytest.mark.parametrize("body", ["", "x,y\n1,2\n", "y,x\n1,2,3\n", "y,x\n1,nan\n"])
def test_other_input_errors(tmp_path, capsys, body):
    f = tmp_path / "f.csv"
    f.write_text(body)
    assert _run(["fit", "--input", f, "--lambda", 0.1], capsys)[0] == 2


def test_missing_file_and_bad_parameters(data_csv, capsys):
    assert _run(["fit", "--input", "/nonexistent.csv", "--lambda", 0.1], capsys)[0] == 2
    assert _run(["fit", "--input", data_csv], capsys)[0] == 2
    assert _run(["fit", "--input", data_csv, "--lambda", 0.1, "--gamma", 0], capsys)[0] == 2
    assert _run(["fit", "--input", data_csv, "--lambda", 0.1, "--folds", 1], capsys)[0] == 2


def test_unknown_scenario_exits_2(capsys):
    assert _run(["simulate", "--scenario", "scenario9", "--seed", 0, "--trials", 1], capsys)[0] == 2


def test_numerical_failure_exits_3(data_csv, capsys, monkeypatch):
    import taulasso.pipeline

    def boom(*a, **k):
        raise SolverDivergenceError("diverged")

    monkeypatch.setattr(taulasso.pipeline, "fit_estimator", boom)
    code, out = _run(["fit", "--input", data_csv, "--lambda", 0.1], capsys)
    assert code == 3 and "numerical" in out.err


def test_failed_trials_exit_4(capsys, monkeypatch):
    import taulasso.simbench.experiments as ex

    def boom(*a, **k):
        raise SolverDivergenceError("diverged")

    monkeypatch.setattr(ex, "fit_estimator", boom)
    code, out = _run(["simulate", "--scenario", "scenario1", "--seed", 0, "--trials", 2, "--estimators", "oracle"],
                     capsys)
    assert code == 4
    assert json.loads(out.out)["n_failed"] == 2


def test_simulate_echoes_configuration(tmp_path, capsys):
    prefix = tmp_path / "sim"
    code, _ = _run(["simulate", "--scenario", "scenario1", "--seed", 1, "--trials", 1, "--estimators", "oracle",
                    "--output", prefix], capsys)
    rep = json.loads((tmp_path / "sim.json").read_text())
    assert code == 0 and rep["config"]["cli"]["seed"] == 1 and rep["config"]["cli"]["trials"] == 1
    assert (tmp_path / "sim.csv").read_text().startswith("scenario,")


def test_simulate_from_spec_file(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"name": "tiny", "n": 40, "beta0": [1.0, 0.0, 2.0], "rho": 0.2, "snr_db": 10.0}))
    code, out = _run(["simulate", "--spec", spec, "--seed", 2, "--trials", 1, "--estimators", "oracle"], capsys)
    assert code == 0 and json.loads(out.out)["config"]["scenarios"][0]["name"] == "tiny"


def test_influence_csv_columns(tmp_path, capsys):
    out_csv = tmp_path / "if.csv"
    code, out = _run(["influence", "--toy-1d", "--lambda-scale", 0.1, "--seed", 0, "--n", 300, "--grid-step", 5,
                      "--output", out_csv], capsys)
    assert code == 0
    rows = list(csv.reader(open(out_csv)))
    assert rows[0] == ["y0", "x0", "if_scale", "if_beta", "sc_scale", "sc_beta"]
    assert len(rows) == 1 + 25
    assert np.all(np.isfinite(np.array(rows[1:], dtype=float)))
    assert json.loads(out.out)["bounded"] is True


def test_breakdown_grid_parsing(capsys):
    assert _run(["breakdown", "--ystar", "1:0:log3", "--trials", 1], capsys)[0] == 2
    assert _run(["breakdown", "--ystar", "1:x:lin3", "--trials", 1], capsys)[0] == 2
    assert _run(["breakdown", "--ystar=-1,2", "--trials", 1], capsys)[0] == 2


def test_console_module_entry_point(data_csv):
    proc = subprocess.run([sys.executable, "-m", "taulasso.cli", "fit", "--input", str(data_csv), "--lambda", "0.2",
                           "--estimator", "tau-lasso", "--starts", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and len(json.loads(proc.stdout)["beta"]) == 10
