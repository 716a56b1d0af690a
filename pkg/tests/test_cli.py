import csv
import json

import numpy as np
import pytest

from fsir.cli import main
from fsir.functional_data import write_csv
from fsir.index import predict
from fsir.persistence import load_model

from conftest import sim_data


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    write_csv(root / "iii.csv", sim_data("iii", 60, 0.1, 1))
    write_csv(root / "vi.csv", sim_data("vi", 80, 0.1, 2))
    return root


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_fit_single(files, tmp_path, capsys):
    out = tmp_path / "m.json"
    rc = main(["fit", "--data", str(files / "iii.csv"), "--indices", "1", "--method", "lc",
               "--h-grid", "0.3,0.6", "--r-grid", "2,3", "--folds", "5", "--out", str(out)])
    assert rc == 0 and out.exists()
    report = (tmp_path / "m.json.report.txt").read_text()
    for key in ("objective=", "dropped=", "cv table:", "beta curves:", "leave-one-curve-out error:"):
        assert key in report
    assert len(read_rows(tmp_path / "m_cv.csv")) == 5
    beta = read_rows(tmp_path / "m_beta.csv")
    assert beta[0] == ["t", "beta1"] and len(beta) == 51


def test_fit_backfit_reports_iterations(files, tmp_path):
    out = tmp_path / "m.json"
    rc = main(["fit", "--data", str(files / "vi.csv"), "--indices", "2", "--backfit",
               "--h-grid", "0.5", "--r-grid", "4", "--out", str(out)])
    assert rc == 0
    line = [l for l in (tmp_path / "m.json.report.txt").read_text().splitlines()
            if l.startswith("backfit iterations_used")][0]
    assert 1 <= int(line.split(":")[1]) <= 10
    assert load_model(out).p == 2


def test_predict_round_trip(files, tmp_path):
    model_path = tmp_path / "m.json"
    assert main(["fit", "--data", str(files / "iii.csv"), "--h-grid", "0.5", "--r-grid", "3",
                 "--out", str(model_path)]) == 0
    pred_path = tmp_path / "p.csv"
    assert main(["predict", "--data", str(files / "iii.csv"), "--model", str(model_path),
                 "--out", str(pred_path)]) == 0
    rows = read_rows(pred_path)
    assert rows[0] == ["prediction", "fallback"] and len(rows) == 61
    vals = np.array([float(r[0]) for r in rows[1:]])
    assert np.all(np.isfinite(vals))
    from fsir.functional_data import load_csv

    in_memory = predict(load_model(model_path), load_csv(files / "iii.csv"))
    np.testing.assert_allclose(vals, in_memory, atol=1e-12, rtol=0)


def test_predict_empty_file(files, tmp_path, capsys):
    (tmp_path / "e.csv").write_text("")
    (tmp_path / "m.json").write_text("{}")
    rc = main(["predict", "--data", str(tmp_path / "e.csv"), "--model", str(tmp_path / "m.json"),
               "--out", str(tmp_path / "p.csv")])
    assert rc != 0
    assert "error" in capsys.readouterr().err
    assert not (tmp_path / "p.csv").exists()


def test_cv_singleton_and_deterministic(files, tmp_path):
    args = ["cv", "--data", str(files / "iii.csv"), "--h-grid", "0.4", "--r-grid", "2",
            "--seed", "3", "--out"]
    assert main(args + [str(tmp_path / "a.csv")]) == 0
    assert main(args + [str(tmp_path / "b.csv")]) == 0
    assert len(read_rows(tmp_path / "a.csv")) == 2
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_config_file_and_override(files, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"h_grid": [0.4, 0.8], "r_grid": [2], "lambda": 0.2, "folds": 4}))
    assert main(["--config", str(cfg), "cv", "--data", str(files / "iii.csv"),
                 "--r-grid", "3", "--out", str(tmp_path / "t.csv")]) == 0
    rows = read_rows(tmp_path / "t.csv")[1:]
    assert [(r[0], float(r[1])) for r in rows] == [("3", 0.4), ("3", 0.8)]


def test_config_unknown_key(files, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["--config", str(cfg), "cv", "--data", "x", "--out", "y"]) == 2
    assert "bogus" in capsys.readouterr().err


@pytest.mark.parametrize("argv, flag", [
    (["fit", "--data", "d.csv"], "--out"),
    (["fit", "--data", "d.csv", "--out", "m", "--backfit"], "--backfit"),
    (["fit", "--data", "d.csv", "--out", "m", "--lambda", "-1"], "--lambda"),
    (["cv", "--data", "d.csv", "--out", "t", "--folds", "1"], "--folds"),
    (["simulate", "--model", "i", "--out", "s", "--runs", "0"], "--runs"),
    (["simulate", "--out", "s"], "--model"),
])
def test_invalid_flags_named(argv, flag, capsys):
    assert main(argv) == 2
    assert flag in capsys.readouterr().err


def test_bad_model_id(capsys):
    assert main(["simulate", "--model", "xi", "--out", "s"]) == 2


def test_simulate_reproducible(tmp_path):
    args = ["simulate", "--model", "iii", "--n", "50", "--runs", "1", "--seed", "7", "--out"]
    assert main(args + [str(tmp_path / "a.csv")]) == 0
    assert main(args + [str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = read_rows(tmp_path / "a.csv")[0]
    assert "RASE" in header and "RSE" in header


def test_simulate_three_indices(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["simulate", "--model", "vi", "--indices", "3", "--n", "60", "--runs", "1",
                 "--fixed-h", "0.5", "--fixed-r", "4", "--out", str(out)]) == 0
    header = read_rows(out)[0]
    assert {"RASE_R1", "RASE_R2", "RASE_R3"} <= set(header)


def test_threads_env(files, tmp_path, monkeypatch):
    monkeypatch.setenv("FSIR_THREADS", "2")
    assert main(["cv", "--data", str(files / "iii.csv"), "--h-grid", "0.4,0.8", "--r-grid", "2",
                 "--out", str(tmp_path / "t.csv")]) == 0
