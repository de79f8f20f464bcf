import csv
import json
import os

import numpy as np
import pytest

from salestack import artifact, cli
from salestack.frame import TARGET, load_csv, prepare
from salestack.pipeline import stage_spec

FAST = {"boosted": {"n_rounds": 10, "max_depth": 2}, "forest": {"n_trees": 5, "max_depth": 5}}


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert cli.main(["synth", "--seed", "2", "--rows", "400", "--out", str(d)]) == 0
    return d


def _config(tmp_path, data_dir, **extra):
    cfg = {"market_csv": str(data_dir / "market.csv"), "socio_csv": str(data_dir / "socio.csv"),
           "seed": 5, "model": {"family": "boosted", "params": FAST["boosted"]},
           "params": {"forest": FAST["forest"]},
           "stack": {"generator_params": FAST, "meta_folds": 3}}
    cfg.update(extra)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def _err(capsys):
    line = capsys.readouterr().err.strip()
    assert "\n" not in line
    return json.loads(line)


def test_synth_outputs(data_dir):
    truth = json.loads((data_dir / "truth.json").read_text())
    assert 0.90 <= truth["bayes_accuracy"] <= 0.95
    header = (data_dir / "market.csv").read_text().splitlines()[0]
    assert "sale_date" in header and "price" in header
    assert (data_dir / "socio.csv").read_text().startswith("month,gdp,cpi,ppi,hpi,effr")


def test_prepare(tmp_path, data_dir):
    cfg = _config(tmp_path, data_dir)
    assert cli.main(["prepare", "--config", cfg, "--out", str(tmp_path / "p")]) == 0
    f = load_csv(tmp_path / "p" / "prepared.csv", cli.PREPARED_SCHEMA)
    assert f.n_rows == 400
    assert "hpi" in f and TARGET in f


@pytest.mark.parametrize("stage, model", [(1, "logistic"), (2, "forest"), (3, "boosted")])
def test_train_evaluate_importance(tmp_path, data_dir, stage, model):
    cfg = _config(tmp_path, data_dir)
    out = tmp_path / "run"
    args = ["--config", cfg, "--stage", str(stage), "--model", model, "--out", str(out)]
    assert cli.main(["train", *args]) == 0
    path = out / f"model_{model}_stage{stage}.json"
    rec = json.loads(path.read_text())
    assert rec["format_version"] == artifact.FORMAT_VERSION
    assert rec["stage"] == stage and rec["family"] == model
    assert cli.main(["evaluate", *args]) == 0
    with open(out / "metrics.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["model", "stage", "accuracy", "precision", "recall", "f1", "error_rate"]
    assert rows[1][:2] == [model, str(stage)]
    assert abs(float(rows[1][2]) + float(rows[1][6]) - 1) < 1e-6
    curves = sorted(os.listdir(out / "curves"))
    assert len(curves) == 16
    assert (out / "report.txt").read_text().startswith(f"{model} stage {stage}")
    assert cli.main(["importance", *args]) == 0
    with open(out / "importance.csv") as fh:
        imp = list(csv.DictReader(fh))
    vals = [float(r["importance"]) for r in imp]
    assert vals == sorted(vals, reverse=True)
    assert len(imp) == {1: 21, 2: 26, 3: 28}[stage]
    assert (out / "importance.svg").read_text().startswith("<svg")


def test_train_byte_identical(tmp_path, data_dir):
    cfg = _config(tmp_path, data_dir)
    for d in ("a", "b"):
        assert cli.main(["train", "--config", cfg, "--stage", "3", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "model_boosted_stage3.json").read_bytes()
    b = (tmp_path / "b" / "model_boosted_stage3.json").read_bytes()
    assert a == b


def test_artifact_round_trip_and_version(tmp_path, synth_small):
    model = stage_spec(2, "forest", FAST["forest"], seed=1).fit(synth_small)
    text = artifact.dumps(model, 2, {"seed": 1})
    p = tmp_path / "m.json"
    p.write_text(text)
    back, rec = artifact.load(p)
    assert artifact.dumps(back, 2, rec["config"]) == text
    np.testing.assert_array_equal(back.predict_proba(synth_small), model.predict_proba(synth_small))
    rec["format_version"] = 99
    p.write_text(json.dumps(rec))
    with pytest.raises(artifact.ArtifactError, match="version"):
        artifact.load(p)
    rec["format_version"] = artifact.FORMAT_VERSION
    rec["config"]["seed"] = 2
    p.write_text(json.dumps(rec))
    with pytest.raises(artifact.ArtifactError, match="fingerprint"):
        artifact.load(p)


def test_evaluate_rejects_bad_version(tmp_path, data_dir, capsys):
    cfg = _config(tmp_path, data_dir)
    out = tmp_path / "run"
    assert cli.main(["train", "--config", cfg, "--out", str(out)]) == 0
    path = out / "model_boosted_stage1.json"
    rec = json.loads(path.read_text())
    rec["format_version"] = 0
    path.write_text(json.dumps(rec))
    assert cli.main(["evaluate", "--config", cfg, "--out", str(out)]) == 2
    assert _err(capsys)["error"] == "artifact"


@pytest.mark.parametrize("argv, kind", [
    (["train"], "config"),
    (["train", "--seed", "1"], "config"),
    (["frobnicate", "--seed", "1"], "usage"),
    (["train", "--seed", "1", "--config", "/no/such.json"], "config"),
    (["evaluate", "--seed", "1", "--artifact", "/no/such.json"], "io"),
])
def test_errors_are_one_json_line(argv, kind, capsys):
    assert cli.main(argv) == 2
    err = _err(capsys)
    assert err["error"] == kind
    assert err["message"]


def test_missing_input_file(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"market_csv": "absent.csv", "seed": 1}))
    out = tmp_path / "o"
    assert cli.main(["train", "--config", str(p), "--out", str(out)]) == 2
    assert _err(capsys)["error"] == "io"
    assert not out.exists()


def test_bad_param_reported(tmp_path, data_dir, capsys):
    cfg = _config(tmp_path, data_dir, model={"family": "forest", "params": {"bogus": 1}})
    assert cli.main(["train", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert _err(capsys)["error"] == "config"


def test_inputs_not_mutated(tmp_path, data_dir):
    before = (data_dir / "market.csv").read_bytes()
    cfg = _config(tmp_path, data_dir)
    assert cli.main(["train", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert (data_dir / "market.csv").read_bytes() == before


def test_stack_command(tmp_path, data_dir):
    cfg = _config(tmp_path, data_dir, families=["logistic", "boosted"])
    assert cli.main(["stack", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    with open(tmp_path / "s" / "ablation.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == cli.METRICS_HEADER
    assert [(r[0], r[1]) for r in rows[1:]] == [(f, str(s)) for s in (1, 2, 3)
                                                for f in ("logistic", "boosted")]


def test_cv_command(tmp_path, data_dir):
    cfg = _config(tmp_path, data_dir, grid={"max_depth": [1, 2]},
                  cv={"outer_k": 2, "inner_k": 2, "select_features": False})
    assert cli.main(["cv", "--config", cfg, "--out", str(tmp_path / "cv")]) == 0
    lines = (tmp_path / "cv" / "cv_report.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
