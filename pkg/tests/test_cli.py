import json

import numpy as np
import pytest

from hybrid_ncl.cli import build_parser, main
from hybrid_ncl.core import PredictionMatrix, read_prediction_csv, write_prediction_csv


@pytest.fixture
def trained(tmp_path):
    assert main(["gen", "--kind", "piecewise", "--n", "300", "--seed", "4", "--out", str(tmp_path / "d.csv")]) == 0
    assert main(["train", "--data", str(tmp_path / "d.csv"), "--out", str(tmp_path / "tr")]) == 0
    return tmp_path / "tr"


def test_train_outputs(trained):
    val = read_prediction_csv(trained / "val.csv")
    assert val.m == 6 and val.n == 30
    cv = json.loads((trained / "cv.json").read_text())
    assert set(cv) == set(val.model_names)


def test_combine(trained, tmp_path, capsys):
    rc = main(["combine", "--val", str(trained / "val.csv"), "--test", str(trained / "test.csv"),
               "--methods", "ncl,bem,gem,eew", "--out", str(tmp_path / "out")])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    report = json.loads(open(lines[0]).read())
    assert [m["method"] for m in report["methods"]] == ["NCL", "BEM", "GEM", "EEW"]


def test_combine_fixed_lambda(trained, tmp_path):
    rc = main(["combine", "--val", str(trained / "val.csv"), "--test", str(trained / "test.csv"),
               "--methods", "NCL-R", "--lambda", "0.4", "--out", str(tmp_path / "out")])
    assert rc == 0


def test_combine_failure_exit_code(tmp_path):
    rng = np.random.default_rng(0)
    write_prediction_csv(PredictionMatrix(rng.normal(size=(10, 2)), np.zeros(10)), tmp_path / "v.csv")
    write_prediction_csv(PredictionMatrix(rng.normal(size=(5, 2)), np.zeros(5)), tmp_path / "t.csv")
    rc = main(["combine", "--val", str(tmp_path / "v.csv"), "--test", str(tmp_path / "t.csv"),
               "--methods", "eiw,bem", "--metric", "mape", "--out", str(tmp_path / "o")])
    assert rc == 1


def test_sweep(trained, tmp_path):
    rc = main(["sweep", "--val", str(trained / "val.csv"), "--test", str(trained / "test.csv"),
               "--grid", "0:1:0.25", "--out", str(tmp_path / "sw")])
    assert rc == 0
    assert len((tmp_path / "sw" / "sweep.csv").read_text().splitlines()) == 6


def test_decompose(trained, tmp_path, capsys):
    main(["decompose", "--val", str(trained / "val.csv"), "--weights", "1,0,0,0,0,0"])
    out = json.loads(capsys.readouterr().out)
    assert out["ambiguity"]["ambiguity"] == 0.0
    rng = np.random.default_rng(1)
    y = rng.normal(size=5)
    paths = []
    for k in range(3):
        write_prediction_csv(PredictionMatrix(y[:, None] + rng.normal(size=(5, 2)), y), tmp_path / f"t{k}.csv")
        paths.append(str(tmp_path / f"t{k}.csv"))
    main(["decompose", "--trials", *paths])
    out = json.loads(capsys.readouterr().out)
    assert "reconstructed_mse" in out["bias_variance_covariance"]


def test_seed_environment(tmp_path, monkeypatch):
    main(["gen", "--n", "30", "--seed", "8", "--out", str(tmp_path / "a.csv")])
    monkeypatch.setenv("HYBRID_NCL_SEED", "8")
    main(["gen", "--n", "30", "--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_compare_dataset_dir(tmp_path, capsys):
    data = tmp_path / "data"
    for k, kind in enumerate(("linear", "sinusoidal", "friedman1")):
        main(["gen", "--kind", kind, "--n", "120", "--seed", str(k), "--out", str(data / f"{kind}.csv")])
    rc = main(["compare", "--data-dir", str(data), "--methods", "ncl,bem,lr", "--out", str(tmp_path / "cmp")])
    assert rc == 0
    report = json.loads((tmp_path / "cmp" / "compare_report.json").read_text())
    assert report["datasets"] == ["friedman1", "linear", "sinusoidal"]
    assert "mean rank" in capsys.readouterr().out


def test_unknown_method():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["combine", "--val", "a", "--test", "b", "--methods", "svm", "--out", "o"])
