import json
import os
import subprocess
import sys

import numpy as np
import pytest
from conftest import random_problem

from evqr import io
from evqr.cli import RunConfig, main
from evqr.measures import DiscreteMeasure


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture
def files(data_dir):
    return {k: os.path.join(data_dir, v) for k, v in {
        "mu": "mu_small.csv", "nu": "nu_small.csv", "bad": "nu_degenerate.csv",
        "model": "model_scalar.json", "config": "config.json"}.items()}


def test_measure_csv_roundtrip(tmp_path, rng):
    p = random_problem(rng, 4, 5, d_x=2, d_y=2)
    io.write_mu_csv(tmp_path / "mu.csv", p.mu)
    io.write_nu_csv(tmp_path / "nu.csv", p.nu, 2)
    mu = io.read_mu_csv(tmp_path / "mu.csv")
    nu, d_x = io.read_nu_csv(tmp_path / "nu.csv")
    assert d_x == 2
    np.testing.assert_array_equal(mu.points, p.mu.points)
    np.testing.assert_array_equal(nu.points, p.nu.points)
    np.testing.assert_array_equal(nu.weights, p.nu.weights)


def test_potentials_and_coupling_roundtrip(tmp_path, rng):
    f, g, h = rng.standard_normal(3), rng.standard_normal((3, 2)), rng.standard_normal(4)
    io.write_potentials_csv(tmp_path / "pots.csv", f, g, h)
    assert (tmp_path / "pots_h.csv").exists()
    f2, g2, h2 = io.read_potentials_csv(tmp_path / "pots.csv")
    np.testing.assert_array_equal(f2, f)
    np.testing.assert_array_equal(g2, g)
    np.testing.assert_array_equal(h2, h)
    pi = rng.uniform(size=(3, 4))
    io.write_coupling_csv(tmp_path / "pi.csv", pi)
    np.testing.assert_array_equal(io.read_coupling_csv(tmp_path / "pi.csv"), pi)


@pytest.mark.parametrize(
    "text, where",
    [
        ("w,u1\n0.5,1\n0.5,abc\n", ":3:"),
        ("w,u1\n0.5,1\n0.5\n", ":3:"),
        ("q,u1\n1,0\n", ":1:"),
        ("w,u1,z\n1,0,0\n", ":1:"),
        ("w,u1\n0.4,1\n0.4,2\n", "sum"),
        ("", "empty"),
    ],
)
def test_malformed_csv_names_the_line(tmp_path, text, where):
    path = tmp_path / "mu.csv"
    path.write_text(text)
    with pytest.raises(io.InputError, match=where):
        io.read_mu_csv(path)


def test_near_normalized_weights_are_rescaled(tmp_path):
    path = tmp_path / "mu.csv"
    path.write_text("w,u1\n0.5000001,0\n0.5,1\n")
    mu = io.read_mu_csv(path)
    assert mu.weights.sum() == pytest.approx(1.0, abs=1e-15)


def test_json_encoding_is_exact_and_handles_nonfinite():
    text = io.dumps_json({"a": 0.1, "b": [1, 2.5], "c": float("inf"), "d": True, "e": None})
    back = json.loads(text)
    assert back["a"] == 0.1 and back["c"] == "inf" and back["d"] is True and back["e"] is None


def test_cli_solve_outputs(tmp_path, files):
    out = tmp_path / "r.json"
    code = run("solve", "--mu", files["mu"], "--nu", files["nu"], "--epsilon", 0.5,
               "--out-coupling", tmp_path / "c.csv", "--out-potentials", tmp_path / "p.csv", "--report", out)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["converged"] and rep["marginal_residual"] < 1e-9
    assert "threads" not in rep["config"] and rep["config"]["seed"] == 0
    pi = io.read_coupling_csv(tmp_path / "c.csv")
    assert pi.shape == (5, 7)
    assert abs(pi.sum() - 1) < 1e-10


def test_cli_config_file_and_override(tmp_path, files):
    out = tmp_path / "r.json"
    assert run("solve", "--config", files["config"], "--mu", files["mu"], "--nu", files["nu"],
               "--tol", 1e-9, "--report", out) == 0
    cfg = json.loads(out.read_text())["config"]
    assert cfg["epsilon"] == 0.5 and cfg["seed"] == 7 and cfg["tol"] == 1e-9


def test_cli_random_init_reaches_same_solution(tmp_path, files):
    paths = []
    for k, extra in enumerate([[], ["--random-init", "--seed", 3]]):
        p = tmp_path / f"p{k}.csv"
        assert run("solve", "--mu", files["mu"], "--nu", files["nu"], "--epsilon", 0.5,
                   "--tol", 1e-11, "--out-potentials", p, "--report", tmp_path / f"r{k}.json", *extra) == 0
        paths.append(p)
    a, b = io.read_potentials_csv(paths[0]), io.read_potentials_csv(paths[1])
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, atol=1e-6)


def test_cli_exit_codes(tmp_path, files, capsys):
    assert run("validate", "--mu", files["mu"], "--nu", files["nu"]) == 0
    assert run("validate", "--mu", files["mu"], "--nu", files["bad"]) == 2
    assert run("solve", "--mu", files["mu"], "--nu", files["bad"]) == 2
    assert run("oracle", "--mu", files["mu"], "--nu", files["bad"]) == 2
    assert run("solve", "--mu", files["mu"], "--nu", files["nu"], "--epsilon", 0.1, "--max-sweeps", 2) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("w,u1\n1,zz\n")
    assert run("solve", "--mu", bad, "--nu", files["nu"]) == 4
    assert "bad.csv:2" in capsys.readouterr().err
    assert run("solve", "--mu", tmp_path / "missing.csv", "--nu", files["nu"]) == 4
    assert run("solve", "--mu", files["mu"], "--nu", files["nu"], "--epsilon", -1) == 2
    notpd = tmp_path / "m.json"
    notpd.write_text(json.dumps({"m_y": [0], "sigma_xx": [[1]], "sigma_xy": [[2]], "sigma_yy": [[1]]}))
    assert run("gaussian", "--model", notpd, "--epsilon", 0.1) == 2
    assert run("sweep", "--model", files["model"], "--eps-grid", "0.1,x") == 4


def test_cli_mismatched_dimensions(tmp_path, files):
    mu2 = tmp_path / "mu2.csv"
    io.write_mu_csv(mu2, DiscreteMeasure([1.0], [[0.0, 0.0, 0.0]]))
    assert run("validate", "--mu", mu2, "--nu", files["nu"]) == 4


def test_cli_gaussian_report(tmp_path, files):
    out = tmp_path / "g.json"
    assert run("gaussian", "--model", files["model"], "--epsilon", 0.3, "--report", out) == 0
    rep = json.loads(out.read_text())
    assert rep["lambda"][0][0] == pytest.approx(0.66394103, abs=1e-8)
    assert rep["riccati_residual"] < 1e-12
    assert rep["log_density_identity_residual"] < 1e-8
    assert rep["w2_first_order_coefficient"] == pytest.approx(0.4)


def test_cli_sweep_table(tmp_path, files):
    out = tmp_path / "s.csv"
    assert run("sweep", "--model", files["model"], "--eps-grid", "0.1,0.01,0.001", "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "epsilon,w2_exact,first_order,ratio,residual_over_eps2"
    ratios = [float(r.split(",")[3]) for r in lines[1:]]
    assert ratios == sorted(ratios) and abs(ratios[-1] - 1) < 1e-3


def test_cli_oracle_passes(tmp_path, files):
    out = tmp_path / "o.json"
    assert run("oracle", "--mu", files["mu"], "--nu", files["nu"], "--epsilon", 0.5, "--report", out) == 0
    assert json.loads(out.read_text())["passed"] is True


def test_small_epsilon_warning_goes_to_stderr(tmp_path):
    mu, nu = tmp_path / "mu.csv", tmp_path / "nu.csv"
    mu.write_text("w,u1\n0.5,0\n0.5,3\n")
    nu.write_text("w,y1\n0.5,0\n0.5,3\n")
    proc = subprocess.run(
        [sys.executable, "-m", "evqr", "solve", "--mu", mu, "--nu", nu, "--epsilon", "1e-7", "--max-sweeps", "5"],
        capture_output=True, text=True,
    )
    assert "epsilon" in proc.stderr and "RuntimeWarning" in proc.stderr
    assert proc.returncode in (0, 3)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(threads=0)
    with pytest.raises(ValueError):
        RunConfig(tol=-1.0)
    assert "threads" not in RunConfig().echo()
