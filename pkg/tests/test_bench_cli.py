import configparser
import math
import textwrap

import numpy as np
import pytest

from asmd import bench
from asmd.bench import (ConfigError, ReferenceNotConverged, fit_rate, fit_rate_file, lasso_coordinate_descent,
                        latent_group_lasso, load_config, parse_window, reference_optimum, run_experiment)
from asmd.cli import main
from asmd.data import build_group_lasso_problem, build_lasso_problem, generate_synthetic_lasso, save_libsvm
from asmd.problem import FiniteSumProblem, LeastSquares, Zero
from asmd.trace import SolverTrace

SMALL = """
[DEFAULT]
N = 80
D = 4
seed = 2
lambda = 0.05

[asmd-II]
solver = asmd
variant = II
stages = 6

[asmd-I third]
solver = asmd
variant = I
alpha3 = 2/3
nu = 5
m = 20
stages = 4

[apg]
solver = apg
iterations = 12

[spgd]
solver = spgd
iterations = 200
"""


def write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


# -- config ------------------------------------------------------------------

def test_config_parses_defaults_and_fractions(tmp_path):
    runs = dict(load_config(write(tmp_path, SMALL)))
    assert set(runs) == {"asmd-II", "asmd-I third", "apg", "spgd"}
    third = runs["asmd-I third"]
    assert third["alpha3"] == 2 / 3 and third["nu"] == 5 and third["m"] == 20
    assert third["n"] == 80 and third["d"] == 4 and third["lambda"] == 0.05
    assert "m" not in runs["asmd-II"]


@pytest.mark.parametrize("body,match", [
    ("[r]\nsolver = asmd\nbogus = 1\n", "valid keys are"),
    ("[r]\nsolver = lbfgs\n", "valid solvers are"),
    ("[r]\nstages = 3\n", "missing 'solver'"),
    ("[r]\nsolver = asmd\nstages = many\n", "not a number"),
    ("[r]\nsolver = asmd\nstages = 2.5\n", "not an integer"),
    ("[r]\nsolver = asmd\npenalty = tv\n", "valid penalties are"),
    ("[r]\nsolver = asmd\nepsilon_kind = loose\n", "valid kinds are"),
    ("[r]\nsolver = asmd\ndataset = nowhere.txt\n", "neither 'synthetic' nor a libsvm file"),
    ("no section header\n", "exp.ini"),
])
def test_config_errors(tmp_path, body, match):
    with pytest.raises(ConfigError, match=match):
        load_config(write(tmp_path, body))


def test_config_resolves_dataset_relative_to_file(tmp_path):
    data, _ = generate_synthetic_lasso(30, 3, 0)
    (tmp_path / "sets").mkdir()
    save_libsvm(data, tmp_path / "sets" / "toy.txt")
    runs = load_config(write(tmp_path, "[r]\nsolver = pgd\ndataset = sets/toy.txt\niterations = 3\n"))
    assert runs[0][1]["dataset"] == str(tmp_path / "sets" / "toy.txt")
    out = run_experiment(write(tmp_path, "[r]\nsolver = pgd\ndataset = sets/toy.txt\niterations = 3\n"),
                         tmp_path / "out")
    assert len(open(out["r"]).read().splitlines()) == 5


# -- experiments -------------------------------------------------------------

def test_empty_config_writes_manifest_only(tmp_path):
    cfg = write(tmp_path, "[DEFAULT]\nN = 10\n")
    out_dir = tmp_path / "out"
    assert run_experiment(cfg, out_dir) == {}
    assert sorted(p.name for p in out_dir.iterdir()) == ["manifest.ini"]


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, SMALL)
    first = run_experiment(cfg, tmp_path / "a", threads=3)
    second = run_experiment(cfg, tmp_path / "b", threads=1)
    assert set(first) == set(second)
    for name in first:
        assert open(first[name], "rb").read() == open(second[name], "rb").read()
    assert (tmp_path / "a" / "manifest.ini").read_bytes() == (tmp_path / "b" / "manifest.ini").read_bytes()
    assert not [p for p in (tmp_path / "a").iterdir() if p.name.startswith(".tmp-")]


def test_trace_files_and_manifest_contents(tmp_path):
    cfg = write(tmp_path, SMALL)
    paths = run_experiment(cfg, tmp_path / "out")
    rows = open(paths["asmd-II"]).read().splitlines()
    assert rows[0] == "stage_or_iter,grads_over_n,objective,gap,wall_ms,max_z_norm"
    assert len(rows) == 1 + 7
    # each ASMD stage costs n + 2m gradients: 3n per stage with m = n
    assert [float(r.split(",")[1]) for r in rows[1:]] == [3.0 * s for s in range(7)]
    assert all(r.split(",")[4] == "0" for r in rows[1:])
    man = configparser.ConfigParser(interpolation=None)
    man.read(tmp_path / "out" / "manifest.ini")
    assert man["asmd-II"]["m"] == "80" and man["asmd-I third"]["m"] == "20"
    assert man["apg"]["trace"] == "apg.csv" and man["asmd-I third"]["trace"] == "asmd-I_third.csv"
    assert float(man["apg"]["reference_value"]) <= float(man["apg"]["final_objective"])
    assert man["spgd"]["seed"] == "2"


def test_timing_flag_records_wall_time(tmp_path):
    cfg = write(tmp_path, "[DEFAULT]\nN = 50\nD = 3\n[apg]\nsolver = apg\niterations = 400\n")
    paths = run_experiment(cfg, tmp_path / "out", timing=True)
    walls = [float(r.split(",")[4]) for r in open(paths["apg"]).read().splitlines()[1:]]
    assert walls[0] == 0.0 and walls[-1] > 0 and walls == sorted(walls)


def test_invalid_solver_settings_surface_as_errors(tmp_path):
    cfg = write(tmp_path, "[DEFAULT]\nN = 20\nD = 3\n[r]\nsolver = asmd\nvariant = III\nstages = 1\n")
    with pytest.raises(ValueError, match="variant"):
        run_experiment(cfg, tmp_path / "out")


# -- references --------------------------------------------------------------

def test_reference_quadratic_1d():
    p = FiniteSumProblem(LeastSquares(np.array([[2.0]]), np.array([3.0])), Zero())
    fstar, xstar = reference_optimum(p, 1e-12)
    assert xstar[0] == pytest.approx(1.5, abs=1e-6) and fstar <= 1e-12


def test_reference_zero_when_lambda_dominates():
    data, _ = generate_synthetic_lasso(50, 4, 0)
    grad0 = np.abs(data.features.T @ data.labels / 50).max()
    p = build_lasso_problem(data, grad0 * 1.01)
    fstar, xstar = reference_optimum(p)
    np.testing.assert_array_equal(xstar, 0.0)
    assert fstar == p.objective(np.zeros(4))


def test_reference_apg_and_coordinate_descent_agree():
    data, _ = generate_synthetic_lasso(300, 8, 5)
    p = build_lasso_problem(data, 0.1)
    tol = 1e-10
    f_apg, _ = reference_optimum(p, tol, polish=False)
    f_cd = p.objective(lasso_coordinate_descent(data.features, data.labels, 0.1))
    assert abs(f_apg - f_cd) <= 10 * tol


def test_reference_overlap_matches_latent_block_solver():
    data, _ = generate_synthetic_lasso(40, 7, 1)
    p = build_group_lasso_problem(data, 0.3)
    fstar, _ = reference_optimum(p, 1e-11)
    x_latent = latent_group_lasso(data.features, data.labels, 0.3, p.regularizer.groups)
    assert abs(fstar - p.objective(x_latent)) <= 1e-9


def test_reference_errors():
    data, _ = generate_synthetic_lasso(30, 3, 0)
    p = FiniteSumProblem(LeastSquares(data.features, data.labels), Zero())
    with pytest.raises(ValueError):
        reference_optimum(p, 0.0)
    with pytest.raises(ReferenceNotConverged) as info:
        reference_optimum(p, 1e-12, max_iter=3)
    assert math.isfinite(info.value.best)


# -- rate fitting ------------------------------------------------------------

def synthetic_trace(power, stages=60, C=3.0):
    tr = SolverTrace("demo", n=1, reference_value=0.0)
    for s in range(stages + 1):
        tr.add(s, s, C / s ** power if s else C)
    return tr


def test_fit_rate_exact_power_laws():
    assert fit_rate(synthetic_trace(2), (5, 50)) == pytest.approx(-2, abs=1e-6)
    assert fit_rate(synthetic_trace(1), (5, 50)) == pytest.approx(-1, abs=1e-6)


def test_fit_rate_errors():
    with pytest.raises(ValueError, match="at least 5"):
        fit_rate(synthetic_trace(2, stages=6), (3, 6))
    tr = synthetic_trace(2)
    tr.reference_value = 0.01
    with pytest.raises(ValueError, match="too loose"):
        fit_rate(tr, (5, 50))
    data = {"stage_or_iter": np.arange(1.0, 11.0), "gap": np.r_[np.ones(9), np.nan]}
    with pytest.raises(ValueError, match="too loose"):
        fit_rate(data, (1, 10))


def test_fit_rate_from_csv(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(synthetic_trace(2).to_csv())
    assert fit_rate_file(path, (5, 50)) == pytest.approx(-2, abs=1e-6)


@pytest.mark.parametrize("text", ["5", "a:b", "5:5", "0:4", "7:3"])
def test_parse_window_rejects(text):
    with pytest.raises(ValueError):
        parse_window(text)


# -- command line ------------------------------------------------------------

def test_cli_run_reference_and_rate(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    out_dir = tmp_path / "out"
    assert main(["run", str(cfg), "--out-dir", str(out_dir), "--threads", "2"]) == 0
    listed = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert set(listed) == {"asmd-II", "asmd-I third", "apg", "spgd"}
    assert main(["reference", str(cfg)]) == 0
    refs = [line.split("\t") for line in capsys.readouterr().out.splitlines()]
    assert len({v for _, v in refs}) == 1
    assert main(["rate", listed["apg"], "--window", "2:12"]) == 0
    assert float(capsys.readouterr().out) < 0


def test_cli_errors_exit_nonzero(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.ini")]) == 1
    assert "asmd-bench: error:" in capsys.readouterr().err
    bad = write(tmp_path, "[r]\nsolver = nope\n")
    assert main(["reference", str(bad)]) == 1
    assert "valid solvers are" in capsys.readouterr().err
    assert main(["run", str(bad), "--threads", "0"]) == 1
    assert main(["rate", str(tmp_path / "none.csv"), "--window", "1:9"]) == 1
    with pytest.raises(SystemExit) as info:
        main(["rate", "x.csv"])
    assert info.value.code == 2
