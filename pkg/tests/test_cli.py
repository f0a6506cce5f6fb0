import json
import subprocess
import sys

import numpy as np
import pytest

from dualdiv.cli import RunConfig, main, reproduce_tables
from dualdiv.io import read_csv


def run(*args):
    return main([str(a) for a in args])


def test_config_roundtrip(tmp_path):
    cfg = RunConfig(cost="p3", c=1.5, beta=12.0, seed=7)
    cfg.save(tmp_path / "c.json")
    assert RunConfig.load(tmp_path / "c.json") == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(Exception):
        RunConfig.from_dict({"nope": 1})


def test_solve_barrier(tmp_path):
    assert run("solve-barrier", "--beta", 37.1, "--out", tmp_path) == 0
    _, data = read_csv(tmp_path / "value_ode.csv")
    assert data[0, 0] == 0.0 and data[0, 1] == 0.0
    summary = json.loads((tmp_path / "solve_barrier.json").read_text())
    assert summary["max_disagreement"] <= 1e-3
    assert summary["config"]["beta"] == 37.1
    assert (tmp_path / "value_ode.csv").read_text().startswith("# config ")


def test_solve_barrier_without_jumps(tmp_path):
    assert run("solve-barrier", "--beta", 10, "--lambda", 0, "--out", tmp_path) == 0
    for name in ("ode", "fredholm"):
        _, data = read_csv(tmp_path / f"value_{name}.csv")
        assert np.all(data[:, 1] == 0.0)


def test_config_file_and_flag_override(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"cost": "p2", "c": 3.0, "beta": 5.0}))
    assert run("solve-barrier", "--config", tmp_path / "c.json", "--c", 2.5, "--out", tmp_path) == 0
    cfg = json.loads((tmp_path / "solve_barrier.json").read_text())["config"]
    assert cfg["cost"] == "p2" and cfg["c"] == 2.5


def test_find_optimal(tmp_path):
    assert run("find-optimal", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "optimal_barrier.json").read_text())
    assert rep["beta_star"] == pytest.approx(31.9659, abs=1e-3)
    header, curve = read_csv(tmp_path / "gamma_curve.csv")
    assert header == ["beta", "gamma"] and curve[0, 1] == pytest.approx(5.0)


@pytest.mark.xfail(strict=True, reason="published value 37.1; the model gives 31.97")
def test_find_optimal_published(tmp_path):
    run("find-optimal", "--out", tmp_path)
    rep = json.loads((tmp_path / "optimal_barrier.json").read_text())
    assert abs(rep["beta_star"] - 37.1) <= 0.5


def test_find_optimal_zero_barrier(tmp_path):
    assert run("find-optimal", "--cost", "const", "--c", 10, "--q", 0.1, "--out", tmp_path) == 0
    assert json.loads((tmp_path / "optimal_barrier.json").read_text())["zero_barrier"] is True


def test_find_optimal_without_crossing(tmp_path):
    assert run("find-optimal", "--q", 0, "--out", tmp_path) == 3
    assert (tmp_path / "gamma_curve.csv").exists()


def test_bad_input_exit_code(tmp_path):
    assert run("solve-barrier", "--out", tmp_path) == 2
    assert run("solve-barrier", "--beta", 5, "--c", -1, "--out", tmp_path) == 2


def test_verify_hjb_on_find_optimal_output(tmp_path):
    assert run("find-optimal", "--out", tmp_path) == 0
    assert run("verify-hjb", "--report", tmp_path / "optimal_barrier.json", "--out", tmp_path) == 0
    assert json.loads((tmp_path / "hjb.json").read_text())["passed"] is True


def test_simulate_deterministic(tmp_path):
    args = ("simulate", "--beta", 20, "--x0", 10, "--paths", 2000, "--seed", 3, "--out", tmp_path)
    assert run(*args) == 0
    first = (tmp_path / "simulate.json").read_bytes()
    assert run(*args) == 0
    assert (tmp_path / "simulate.json").read_bytes() == first


def test_simulate_path_log(tmp_path):
    assert run("simulate", "--beta", 20, "--x0", 10, "--paths", 10, "--path-log", "--out", tmp_path) == 0
    assert (tmp_path / "paths.csv").exists()


def test_exit_functions(tmp_path):
    assert run("exit-functions", "--beta", 20, "--out", tmp_path) == 0
    header, data = read_csv(tmp_path / "exit_functions.csv")
    assert header == ["x", "W", "G1", "Gid", "Z", "gtilde"]
    assert data[0, header.index("Z")] == 1.0


def test_sweep_q_decreasing(tmp_path):
    assert run("sweep", "--param", "q", "--start", 0.08, "--stop", 0.17, "--num", 4, "--out", tmp_path) == 0
    header, data = read_csv(tmp_path / "sweep_q.csv")
    assert np.all(np.diff(data[:, 1]) < 0)


def test_sweep_mu_decreasing(tmp_path):
    assert run("sweep", "--param", "mu", "--start", 0.005, "--stop", 0.02, "--num", 4, "--out", tmp_path) == 0
    header, data = read_csv(tmp_path / "sweep_mu.csv")
    assert np.all(np.diff(data[:, 1]) < 0)


def test_sweep_c_interior_maximum(tmp_path):
    assert run("sweep", "--param", "c", "--start", 1.0, "--stop", 4.5, "--num", 8, "--out", tmp_path) == 0
    _, data = read_csv(tmp_path / "sweep_c.csv")
    i = int(np.argmax(data[:, 1]))
    assert 0 < i < data.shape[0] - 1


@pytest.mark.xfail(strict=True, reason="published peak near c = 2.6; the model peaks near c = 2")
def test_sweep_c_peak_location(tmp_path):
    run("sweep", "--param", "c", "--start", 1.0, "--stop", 4.5, "--num", 15, "--out", tmp_path)
    _, data = read_csv(tmp_path / "sweep_c.csv")
    assert abs(data[int(np.argmax(data[:, 1])), 0] - 2.6) <= 0.25


def test_sweep_gaps_recorded(tmp_path):
    # q = 0 has no crossing: the gap is recorded and the command still succeeds
    assert run("sweep", "--param", "q", "--start", 0.0, "--stop", 0.1, "--num", 2, "--out", tmp_path) == 0
    header, data = read_csv(tmp_path / "sweep_q.csv")
    assert np.isnan(data[0, 1]) and data[0, -1] == 1.0
    assert np.isfinite(data[1, 1]) and data[1, -1] == 0.0


@pytest.fixture(scope="module")
def tables():
    return reproduce_tables(RunConfig())


def test_reproduce_tables_shape(tables):
    assert [len(tables[k]) for k in ("table1", "table2", "table3")] == [8, 7, 9]
    readings = [r.get("reading") for r in tables["table3"][-2:]]
    assert readings == ["0.27", "0.027"]
    assert tables["table3"][-2]["beta_star"] == 0.0


@pytest.mark.xfail(strict=True, reason="published table values are not reproduced by the model")
@pytest.mark.parametrize("table,row,expected", [("table1", 0, 26.5), ("table2", 5, 23.2), ("table3", 0, 54.7)])
def test_reproduce_tables_published(tables, table, row, expected):
    assert abs(tables[table][row]["beta_star"] - expected) <= 0.5


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "dualdiv", "exit-functions", "--beta", "5", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "exit_functions.csv" in r.stdout
