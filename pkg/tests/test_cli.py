import json
import subprocess
import sys

import pytest

from rfidsense.cli import main
from rfidsense.ingest import read_reader_log


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    ws = tmp_path_factory.mktemp("cli")
    plan = {"seed": 3, "kind": "onesec", "scale": 0.1}
    (ws / "plan.json").write_text(json.dumps(plan))
    assert main(["simulate", "--plan", str(ws / "plan.json"), "--out", str(ws / "sim")]) == 0
    assert main(["extract", "--mode", "window", "--in", str(ws / "sim" / "reads.csv"),
                 "--out", str(ws / "feats.csv")]) == 0
    assert main(["split", "--in", str(ws / "feats.csv"), "--out", str(ws / "split")]) == 0
    assert main(["train", "--preset", "onesec", "--data", str(ws / "split"), "--out", str(ws / "model"),
                 "--max-epochs", "20", "--patience", "5"]) == 0
    return ws


def test_pipeline_artifacts(workspace):
    ws = workspace
    assert len(read_reader_log(ws / "sim" / "reads.csv").reads) > 1000
    assert {"train.csv", "val.csv", "test.csv", "split.json"} <= {p.name for p in (ws / "split").iterdir()}
    assert {"model.json", "history.json", "metrics.json"} <= {p.name for p in (ws / "model").iterdir()}


def test_extract_single_and_naive(workspace, tmp_path):
    reads = str(workspace / "sim" / "reads.csv")
    assert main(["extract", "--mode", "single", "--in", reads, "--out", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "rssi_mean,phase_mean,label"
    assert main(["extract", "--mode", "window", "--naive-phase", "--in", reads, "--out", str(tmp_path / "n.csv")]) == 0
    assert (tmp_path / "n.csv").read_text() != (workspace / "feats.csv").read_text()


def test_eval_outputs(workspace, tmp_path, capsys):
    rc = main(["eval", "--model", str(workspace / "model" / "model.json"), "--data", str(workspace / "split" / "test.csv"),
               "--json", str(tmp_path / "m.json"), "--confusion-csv", str(tmp_path / "c.csv")])
    assert rc == 0
    assert "accuracy" in capsys.readouterr().out
    m = json.loads((tmp_path / "m.json").read_text())
    stored = json.loads((workspace / "model" / "metrics.json").read_text())
    assert m["accuracy"] == stored["accuracy"]
    assert (tmp_path / "c.csv").read_text().startswith("true\\pred,Control")


def test_train_from_features_dir(workspace, tmp_path):
    d = tmp_path / "d"
    d.mkdir()
    (d / "features.csv").write_text((workspace / "feats.csv").read_text())
    assert main(["train", "--preset", "onesec", "--data", str(d), "--out", str(tmp_path / "m"), "--max-epochs", "3"]) == 0


def test_train_wrong_preset_fails(workspace, capsys):
    rc = main(["train", "--preset", "single", "--data", str(workspace / "split"), "--out", "/tmp/unused"])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error: [train]")


def test_monitor_file_and_stdin(workspace, tmp_path):
    model = str(workspace / "model" / "model.json")
    reads = workspace / "sim" / "reads.csv"
    out = tmp_path / "ev.csv"
    assert main(["monitor", "--model", model, "--in", str(reads), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "seq,timestamp_ms,tag_id,class,confidence"
    assert any(",Backpack," in l or ",JacketPocket," in l for l in lines[1:])
    proc = subprocess.run([sys.executable, "-m", "rfidsense", "monitor", "--model", model, "--stdin"],
                          input=reads.read_text(), capture_output=True, text=True, check=True)
    assert proc.stdout.splitlines() == lines
    assert "reads=" in proc.stderr


def test_run_and_compare(tmp_path, capsys):
    dirs = []
    for kind, seed in (("single", 0), ("onesec", 0)):
        cfg = {"kind": kind, "seed": seed, "plan_scale": 0.1, "train": {"max_epochs": 10}}
        (tmp_path / f"{kind}.json").write_text(json.dumps(cfg))
        out = tmp_path / "runs" / kind
        assert main(["run", "--config", str(tmp_path / f"{kind}.json"), "--out", str(out)]) == 0
        dirs.append(str(out))
    capsys.readouterr()
    assert main(["compare", *dirs]) == 0
    text = capsys.readouterr().out
    assert "single" in text and "onesec" in text


def test_stage_tagged_errors(tmp_path, capsys):
    bad = tmp_path / "r.csv"
    bad.write_text("timestamp_ms,tag_id,antenna_port,rssi_dbm,phase,distance_m,label\n5,A,1,-60,9.9,,Control\n")
    assert main(["extract", "--mode", "window", "--in", str(bad), "--out", str(tmp_path / "f.csv")]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error: [extract]") and "line 2" in err
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert capsys.readouterr().err.startswith("error: [")
