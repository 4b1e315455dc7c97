import csv
import io
import json

import numpy as np
import pytest

from mltrace.cli import main
from mltrace.matio import SparseMatrix, write_matrix_market

from .conftest import complete_graph, path_graph


def write(tmp_path, name, A, symmetric=None):
    p = tmp_path / name
    with open(p, "w") as fh:
        write_matrix_market(A, fh, symmetric)
    return str(p)


def run(argv):
    out = io.StringIO()
    code = main(argv, out)
    return code, out.getvalue()


def test_single_cube_diagonal_exact(tmp_path):
    path = write(tmp_path, "diag.mtx", SparseMatrix.from_dense(np.diag([1.0, 2.0, 3.0])))
    code, out = run(["estimate", "--matrix", path, "--fn", "cube", "--degree", "3", "--mode", "single", "--samples", "50", "--json"])
    assert code == 0
    rep = json.loads(out)
    assert rep["estimate"] == pytest.approx(36.0, rel=1e-13)
    assert rep["stderr"] < 1e-12
    assert rep["matvecs"] == 150
    assert rep["info"]["version"] and rep["seed"] == 0
    assert rep["info"]["config"]["samples"] == 50


def test_multilevel_text_report(tmp_path):
    code, out = run(["estimate", "--synthetic", "40", "--fn", "sqrt", "--interval", "0,1", "--degree", "30", "--budget-matvecs", "1500", "--seed", "5"])
    assert code == 0
    assert "levels" in out and "matvecs" in out and "seed       5" in out


def test_fixed_levels(tmp_path):
    code, out = run(["estimate", "--synthetic", "40", "--fn", "sqrt", "--interval", "0,1", "--degree", "30", "--mode", "fixed-levels:3,10,30", "--budget-matvecs", "1500", "--json"])
    assert code == 0
    assert json.loads(out)["plan"]["levels"] == [3, 10, 30]


def test_env_seed_and_config(tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"fn": "exp", "degree": 8, "budget_matvecs": 400, "interval": [0, 1]}))
    monkeypatch.setenv("TRACE_MLMC_SEED", "77")
    code, out = run(["estimate", "--config", str(cfg), "--synthetic", "20", "--json"])
    assert code == 0
    rep = json.loads(out)
    assert rep["seed"] == 77 and rep["info"]["function"] == "exp"
    code, out = run(["estimate", "--config", str(cfg), "--synthetic", "20", "--json", "--degree", "6", "--seed", "1"])
    rep = json.loads(out)
    assert rep["info"]["degree"] == 6 and rep["seed"] == 1


def test_csv_append(tmp_path):
    target = tmp_path / "out.csv"
    for _ in range(2):
        run(["estimate", "--synthetic", "20", "--fn", "exp", "--degree", "5", "--interval", "0,1", "--mode", "single", "--samples", "10", "--csv", str(target)])
    rows = list(csv.reader(open(target)))
    assert rows[0] == ["matrix", "function", "degree", "mode", "trial", "seed", "estimate", "stderr", "matvecs"]
    assert len(rows) == 3


def test_sweep_rows(tmp_path):
    target = tmp_path / "sweep.csv"
    code, _ = run(["sweep", "--synthetic", "30", "--fn", "sqrt", "--interval", "0,1", "--degrees", "25,50", "--trials", "3", "--out", str(target)])
    assert code == 0
    rows = list(csv.DictReader(open(target)))
    assert len(rows) == 12
    assert {r["mode"] for r in rows} == {"single", "multilevel"}
    single = [int(r["matvecs"]) for r in rows if r["mode"] == "single"]
    assert single == [1250] * 3 + [2500] * 3


def test_triangles_exhaustive(tmp_path):
    path = write(tmp_path, "k3.mtx", complete_graph(3))
    code, out = run(["triangles", "--matrix", path, "--no-cv", "--exhaustive", "--json"])
    assert code == 0
    res = json.loads(out)
    assert res["estimate"] == 1.0 and res["stderr"] == 0.0
    path = write(tmp_path, "p3.mtx", path_graph(3))
    res = json.loads(run(["triangles", "--matrix", path, "--exhaustive", "--json"])[1])
    assert res["estimate"] == pytest.approx(0.0, abs=1e-12) and res["stderr"] == 0.0


def test_triangles_cv_reports_coefficients(tmp_path):
    path = write(tmp_path, "k5.mtx", complete_graph(5))
    code, out = run(["triangles", "--matrix", path, "--samples", "20", "--json"])
    res = json.loads(out)
    assert code == 0 and res["cv"] and res["a1"] is not None and res["matvecs"] == 40


@pytest.mark.parametrize(
    "argv, code",
    [
        (["estimate", "--bogus"], 1),
        ([], 1),
        (["estimate", "--synthetic", "5", "--mode", "weird", "--degree", "3", "--samples", "2"], 1),
        (["estimate", "--matrix", "/does/not/exist.mtx", "--degree", "3", "--samples", "2"], 2),
        (["estimate", "--synthetic", "5", "--fn", "log", "--interval=-1,1", "--degree", "4", "--samples", "2"], 2),
        (["estimate", "--synthetic", "20", "--fn", "exp", "--interval", "0,0.1", "--degree", "40", "--mode", "single", "--samples", "2"], 3),
    ],
)
def test_exit_codes(argv, code, capsys):
    assert main(argv, io.StringIO()) == code


def test_bad_matrix_market_is_data_error(tmp_path):
    p = tmp_path / "bad.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real general\n2 2 1\n9 9 1.0\n")
    assert main(["triangles", "--matrix", str(p)], io.StringIO()) == 2


def test_nonadjacency_is_data_error(tmp_path):
    path = write(tmp_path, "w.mtx", SparseMatrix.from_dense(np.array([[0.0, 2.0], [2.0, 0.0]])))
    assert main(["triangles", "--matrix", path], io.StringIO()) == 2
