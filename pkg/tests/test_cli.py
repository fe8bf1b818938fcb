import csv
import json

import numpy as np
import pytest

from extremeloss import cli, gbdt, pipeline
from extremeloss.gbdt import GbdtModel, Tree

REDUCED = """\
synth.start = 2018-09-01T00:00:00
synth.end = 2018-11-20T00:00:00
test_months = 2018-10
gbdt.n_rounds = 5
gbdt.learning_rate = 0.1
mlp.epochs = 3
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "run.cfg"
    cfg.write_text(REDUCED)
    raw, data = root / "raw", root / "data"
    assert cli.main(["synth", "--config", str(cfg), "--out", str(raw)]) == 0
    assert cli.main(["preprocess", "--config", str(cfg), "--input", str(raw / "raw.csv"),
                     "--out", str(data)]) == 0
    return root, cfg, raw, data


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_synth_writes_csv_and_manifest(workspace):
    _, _, raw, _ = workspace
    lines = (raw / "raw.csv").read_text().splitlines()
    assert lines[0] == "Time,Temperature,Humidity,Pressure,Illumination,CO2"
    assert len(lines) > 1000
    manifest = json.loads((raw / "manifest.json").read_text())
    assert set(manifest) == {"outlier_times", "burst_spans", "burst_times", "gap_spans"}


def test_preprocess_outputs(workspace):
    _, _, _, data = workspace
    report = json.loads((data / "clean_report.json").read_text())
    assert report["n_train"] > 0 and report["n_test"] > 0
    assert report["test_months"] == "2018-10"
    test = pipeline.WindowDataset.from_csv(data / "test.csv")
    assert len(test) == report["n_test"]
    assert test.X.shape[1] == 120


def test_train_baseline_gbdt(workspace, tmp_path):
    _, cfg, _, data = workspace
    assert cli.main(["train", "--config", str(cfg), "--input", str(data), "--out", str(tmp_path),
                     "--baseline"]) == 0
    model = gbdt.deserialize((tmp_path / "model.gbdt").read_bytes())
    assert model.objective["name"] == "squared_error"
    trace = [float(r["train_loss"]) for r in _rows(tmp_path / "loss_trace.csv")]
    assert len(trace) == 6
    assert all(b <= a for a, b in zip(trace, trace[1:]))


def test_train_improved_echoes_weights(workspace, tmp_path):
    _, cfg, _, data = workspace
    assert cli.main(["train", "--config", str(cfg), "--input", str(data), "--out", str(tmp_path),
                     "--a", "0.9"]) == 0
    train = pipeline.WindowDataset.from_csv(data / "train.csv")
    n_low = int(np.sum(train.y <= 10))
    n_high = int(np.sum(train.y >= 30))
    n_normal = len(train) - n_low - n_high
    text = (tmp_path / "loss_config.txt").read_text()
    assert f"w_high = {n_normal / n_high!r}" in text
    assert f"w_low = {n_normal / n_low!r}" in text
    assert "a = 0.9" in text
    model = gbdt.deserialize((tmp_path / "model.gbdt").read_bytes())
    assert model.objective["name"] == "improved_loss"


def test_train_mlp(workspace, tmp_path):
    _, cfg, _, data = workspace
    assert cli.main(["train", "--config", str(cfg), "--input", str(data), "--out", str(tmp_path),
                     "--model", "mlp"]) == 0
    assert (tmp_path / "model.mlp").read_bytes().startswith(b"EXTREMELOSS-MLP 1\n")
    rows = _rows(tmp_path / "loss_trace.csv")
    assert [r["epoch"] for r in rows] == ["1", "2", "3"]


def test_eval_report_pair(workspace, tmp_path):
    _, cfg, _, data = workspace
    reports = {}
    for flag in ("--baseline", None):
        out = tmp_path / (flag or "improved").strip("-")
        args = ["train", "--config", str(cfg), "--input", str(data), "--out", str(out)]
        assert cli.main(args + ([flag] if flag else [])) == 0
        assert cli.main(["eval", "--config", str(cfg), "--model-file", str(out / "model.gbdt"),
                         "--input", str(data), "--out", str(out)]) == 0
        reports[out.name] = json.loads((out / "report.json").read_text())
        assert len(_rows(out / "report.csv")) == 1
    assert reports["baseline"]["n"] == reports["improved"]["n"]


def test_eval_perfect_oracle_stub(tmp_path):
    X = np.zeros((3, 120))
    X[:, 0] = [0.0, 1.0, 2.0]
    test = pipeline.WindowDataset(X, np.array([35.0, 20.0, 5.0]), np.array([0, 600, 1200]) + 1_530_000_000)
    test.to_csv(tmp_path / "test.csv")
    # f000 <= 0 -> 35, f000 <= 1 -> 20, else 5
    tree = Tree(np.array([0, -1, 0, -1, -1]), np.array([0.0, 0.0, 1.0, 0.0, 0.0]),
                np.array([1, -1, 3, -1, -1]), np.array([2, -1, 4, -1, -1]),
                np.array([0.0, 35.0, 0.0, 20.0, 5.0]))
    stub = GbdtModel(base_score=0.0, learning_rate=1.0, n_features=120, trees=[tree])
    (tmp_path / "oracle.gbdt").write_bytes(gbdt.serialize(stub))
    assert cli.main(["eval", "--model-file", str(tmp_path / "oracle.gbdt"),
                     "--input", str(tmp_path), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["recall_combined"] == 1.0
    assert report["mae_high"] == report["mae_low"] == 0.0


def test_sweep_rows(workspace, tmp_path):
    _, cfg, _, data = workspace
    assert cli.main(["sweep", "--config", str(cfg), "--input", str(data), "--out", str(tmp_path),
                     "--a-values", "0.5,0.9"]) == 0
    rows = _rows(tmp_path / "sweep.csv")
    assert [r["a"] for r in rows] == ["baseline", "0.5", "0.9"]
    n_test = json.loads((data / "clean_report.json").read_text())["n_test"]
    assert {int(r["n"]) for r in rows} == {n_test}
    summary = (tmp_path / "summary.txt").read_text()
    assert "prediction - truth" in summary
    assert summary.count("a=") == 3


def test_unwritable_output_dir(workspace, tmp_path):
    _, cfg, _, _ = workspace
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["synth", "--config", str(cfg), "--out", str(blocker / "sub")]) == 2


def test_missing_model_file(workspace, tmp_path):
    _, _, _, data = workspace
    assert cli.main(["eval", "--model-file", str(tmp_path / "nope.gbdt"), "--input", str(data),
                     "--out", str(tmp_path)]) == 2


def test_not_a_model_file(workspace, tmp_path):
    _, _, _, data = workspace
    (tmp_path / "junk").write_bytes(b"hello\n")
    assert cli.main(["eval", "--model-file", str(tmp_path / "junk"), "--input", str(data),
                     "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("a", ["0", "1", "1.5", "-0.2"])
def test_a_outside_open_interval(workspace, tmp_path, a):
    _, cfg, _, data = workspace
    assert cli.main(["train", "--config", str(cfg), "--input", str(data), "--out", str(tmp_path),
                     "--a", a]) == 2


def test_test_months_absent(workspace, tmp_path):
    _, cfg, raw, _ = workspace
    code = cli.main(["preprocess", "--config", str(cfg), "--input", str(raw / "raw.csv"),
                     "--out", str(tmp_path), "--test-months", "2017-01"])
    assert code == 1


def test_twenty_minutes_of_data(tmp_path, caplog):
    lines = ["Time,Temperature,Humidity,Pressure,Illumination,CO2"]
    for m in range(20):
        lines.append(f"2018/08/01 12:{m:02d}:00,25.00,60.0,1000.0,30000.0,450.0")
    (tmp_path / "raw.csv").write_text("\n".join(lines) + "\n")
    with caplog.at_level("WARNING"):
        code = cli.main(["preprocess", "--input", str(tmp_path / "raw.csv"), "--out", str(tmp_path)])
    assert code == 1
    assert "zero windows" in caplog.text
    report = json.loads((tmp_path / "clean_report.json").read_text())
    assert report["windows"] == 0


def test_missing_header_is_usage_error(tmp_path):
    (tmp_path / "raw.csv").write_text("2018/08/01 12:00:00,25.00,60.0,1000.0,30000.0,450.0\n")
    assert cli.main(["preprocess", "--input", str(tmp_path / "raw.csv"), "--out", str(tmp_path)]) == 2


def test_missing_input_and_unknown_config_key(tmp_path):
    assert cli.main(["train", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert cli.main(["synth", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_empty_band_is_domain_error(tmp_path):
    # only normal temperatures: no extreme band to weight
    rng = np.random.default_rng(0)
    X = rng.normal(20, 1, (30, 120))
    ds = pipeline.WindowDataset(X, rng.uniform(15, 25, 30), np.arange(30) * 600 + 1_530_000_000)
    ds.to_csv(tmp_path / "train.csv")
    assert cli.main(["train", "--input", str(tmp_path), "--out", str(tmp_path)]) == 1


def test_synth_twice_identical(workspace, tmp_path):
    _, cfg, raw, _ = workspace
    assert cli.main(["synth", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "raw.csv").read_bytes() == (raw / "raw.csv").read_bytes()
    assert (tmp_path / "manifest.json").read_bytes() == (raw / "manifest.json").read_bytes()
