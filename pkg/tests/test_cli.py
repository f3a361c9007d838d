import csv
import json
import math

import pytest

from maxdde import cli
from maxdde.io import fmt


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_fmt_full_precision():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3"
    assert fmt(True) == "1"
    assert float(fmt(math.pi)) == math.pi


def test_simulate_outputs(tmp_path):
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--preset", "ex2", "--p", "1.5", "--tmax", "20", "--out", str(out)]) == 0
    rows = read_csv(out / "trajectory.csv")
    assert rows[0] == ["t", "u", "uprime", "window_max", "f"]
    t0, u0 = float(rows[1][0]), float(rows[1][1])
    assert u0 == pytest.approx(1.5)
    # raw time: t0 is the raw start of the history plateau end
    assert float(rows[1][4]) == pytest.approx(1 - math.sin(t0), abs=1e-12)
    ev = read_csv(out / "events.csv")
    assert ev[0] == ["tau", "value", "branch_j"] and len(ev) > 1
    assert read_csv(out / "projection.csv")[0] == ["t", "u", "u_delayed"]
    meta = json.loads((out / "simulate.json").read_text())
    assert meta["events"] == len(ev) - 1


def test_csv_is_deterministic(tmp_path):
    args = ["simulate", "--preset", "ex1", "--p", "1.2", "--tmax", "12"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("trajectory.csv", "events.csv", "projection.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_return_map_csv(tmp_path):
    assert cli.main(["return-map", "--grid", "4", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "return_map.csv")
    assert rows[0] == ["p", "q", "lambda", "mu", "nu_star", "R", "Rprime", "branch_j", "u_shaped"]
    assert len(rows) == 5
    assert float(rows[1][5]) == pytest.approx(2.2372776, abs=1e-6)


def test_analyze_ex1(tmp_path):
    assert cli.main(["analyze", "--preset", "ex1", "--grid", "60", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "analysis.json").read_text())
    fps = [f["p"] for f in rep["fixed_points"]["1"]]
    assert fps[0] == pytest.approx(1.0, abs=1e-8)
    assert rep["q0"] == "not applicable"


def test_problem_file(tmp_path):
    definition = {"a": 0.32, "b": -1.0, "h": 1.5 * math.pi, "forcing": {"type": "one_minus_sin"}}
    path = tmp_path / "prob.json"
    path.write_text(json.dumps(definition))
    assert cli.main(["return-map", "--problem", str(path), "--grid", "2", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "return_map.csv")
    assert float(rows[1][5]) == pytest.approx(2.2372776, abs=1e-6)


def test_appendix_verify(tmp_path, capsys):
    assert cli.main(["appendix-verify", "--grid", "300", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "appendix.json").read_text())
    assert rep["signs_ok"] is True
    assert rep["within_reference"]["min_psi"] is True
    assert "min_increment" in capsys.readouterr().out


def test_certify_refusal(tmp_path):
    code = cli.main(["certify", "--grid", "201", "--tol", "1.0", "--out", str(tmp_path)])
    assert code == 2
    rep = json.loads((tmp_path / "certificate.json").read_text())
    assert rep["valid"] is False and rep["relation"]


def test_certify_ex1_refused(tmp_path):
    assert cli.main(["certify", "--preset", "ex1", "--grid", "201", "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["simulate", "--preset", "ex9"],
    ["simulate", "--dt", "-1"],
    ["simulate", "--dt", "1.0"],
    ["return-map", "--grid", "1"],
    ["simulate", "--problem", "/nonexistent/file.json"],
    ["simulate", "--p", "nan", "--tmax", "1"],
    ["simulate", "--tmax", "0"],
])
def test_invalid_input_exit_code(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)] if argv else argv) == 1
