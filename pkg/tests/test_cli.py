import csv
import json
import os
import subprocess
import sys

import pytest

from frl.cli import UsageError, main, parse_grid
from frl.constants import c_frac
from frl.quadrature import DivergenceError


def test_parse_grid_forms():
    assert parse_grid("0.6:0.9:0.1") == [0.6, 0.7, 0.8, 0.9]
    assert parse_grid("0.6,0.75") == [0.6, 0.75]
    assert parse_grid("0.75") == [0.75]


@pytest.mark.parametrize("bad", ["0.6:0.9", "0.6:0.9:0", "a,b", "", "0.4", "0.8,0.7", "0.6:0.9:-0.1", "1.0"])
def test_parse_grid_errors(bad):
    with pytest.raises(UsageError):
        parse_grid(bad)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_constants_json(capsys):
    code, out, _ = run(["constants", "--N", "2", "--s", "0.75", "--alpha", "0,0.5"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["schema"] == 1 and d["c_ns"] == c_frac(2, 0.75)
    assert [g["alpha"] for g in d["gamma"]] == [0.0, 0.5]


def test_solve_and_eigen_files(tmp_path, capsys):
    js = tmp_path / "u.json"
    assert main(["solve", "--s", "0.75", "--n", "6", "--out", str(js)]) == 0
    d = json.loads(js.read_text())
    assert d["rhs"] == 1.0 and len(d["coeffs"]) == 6
    cs = tmp_path / "e.csv"
    assert main(["eigen", "--s", "0.75", "--n", "6", "--k", "2", "--out", str(cs)]) == 0
    rows = list(csv.DictReader(cs.open()))
    assert [r["index"] for r in rows] == ["1", "2"]
    assert float(rows[0]["lambda"]) < float(rows[1]["lambda"])


def test_identity_small(tmp_path):
    cs = tmp_path / "id.csv"
    assert main(["identity", "--s", "0.75", "--n", "8", "--out", str(cs)]) == 0
    (row,) = list(csv.DictReader(cs.open()))
    assert float(row["ds_estimate"]) == pytest.approx(-0.10251689741, abs=1e-6)


def test_lemma27(capsys):
    code, out, _ = run(["lemma27", "--s", "0.75", "--field", "x"], capsys)
    assert code == 0
    (r,) = json.loads(out)["results"]
    assert r["relative_residual"] <= 1e-3


@pytest.mark.parametrize("argv", [
    ["constants", "--s", "0.3"],
    ["constants", "--N", "0", "--s", "0.75"],
    ["solve", "--s", "0.75", "--n", "0"],
    ["solve", "--s", "0.75", "--out", "x.txt"],
    ["eigen", "--s", "0.75", "--n", "4", "--k", "5"],
    ["identity", "--s", "0.75", "--levels", "1"],
    ["identity", "--s", "0.75", "--solution", "bogus"],
    ["probe-remainder", "--s", "0.5:0.9:0.1"],
    ["lemma27", "--s", "0.75", "--center", "0.8"],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_numerical_failure_exit_1(monkeypatch, capsys):
    import frl.cli

    def boom(*a, **k):
        raise DivergenceError("estimates keep growing", [1.0, 2.0, 4.0])

    monkeypatch.setattr(frl.cli, "solve_dirichlet", boom)
    code, out, err = run(["solve", "--s", "0.75", "--n", "4"], capsys)
    assert code == 1 and out == ""
    d = json.loads(err)
    assert d["status"] == "numerical-failure" and d["error_type"] == "DivergenceError"
    assert d["history"] == [1.0, 2.0, 4.0]


def test_output_is_reproducible(tmp_path):
    env = dict(os.environ, FRL_THREADS="3")
    cmd = [sys.executable, "-m", "frl", "identity", "--s", "0.6,0.8", "--n", "6"]
    a = subprocess.run(cmd, capture_output=True, env=env, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, env=dict(env, FRL_THREADS="1"), check=True).stdout
    assert a == b
