from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from conftest import make_trace
from pilstm.cli import EXIT_CODES, exit_code_for, main
from pilstm.data import write_trace_csv
from pilstm.config import CONFIG_TAG, digest, read_config, read_manifest
from pilstm import errors
from pilstm.sim import preset_catalog, write_catalog

SMALL = ["--epochs", "2", "--window", "10", "--hidden", "4", "--lr", "1e-3"]


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--out", str(d), "--seed", "3"]) == 0
    return d


@pytest.fixture(scope="module")
def run_dir(sim_dir, tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    assert main(["train", "--data", str(sim_dir), "--out", str(d), "--holdout", "Batt-9,Batt-12", *SMALL]) == 0
    return d


def _rows(path: Path) -> list[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_simulate_default_catalog(sim_dir):
    files = sorted(p.name for p in sim_dir.glob("*.csv"))
    assert files == sorted(f"Batt-{k}.csv" for k in range(1, 14))
    header, entries = read_manifest(sim_dir / "manifest.txt")
    assert header["count"] == 13 and len(entries) == 13
    assert entries[0]["id"] == "Batt-1" and entries[0]["seed"] == 3001
    assert len(entries[0]["law_params_digest"]) == 64
    assert (sim_dir / "resolved_config.txt").read_text().startswith(CONFIG_TAG)


def test_simulate_deterministic(sim_dir, tmp_path):
    assert main(["simulate", "--out", str(tmp_path), "--seed", "3"]) == 0
    for f in sim_dir.glob("*.csv"):
        assert (tmp_path / f.name).read_bytes() == f.read_bytes()


def test_simulate_empty_catalog(tmp_path):
    cat = tmp_path / "empty.txt"
    write_catalog([], cat)
    assert main(["simulate", "--catalog", str(cat), "--out", str(tmp_path / "o")]) == 0
    header, entries = read_manifest(tmp_path / "o" / "manifest.txt")
    assert header["count"] == 0 and entries == []


def test_simulate_custom_catalog_and_errors(tmp_path):
    cat = tmp_path / "cat.txt"
    write_catalog(preset_catalog()[:2], cat)
    assert main(["simulate", "--catalog", str(cat), "--out", str(tmp_path / "o")]) == 0
    assert len(list((tmp_path / "o").glob("*.csv"))) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("id,mode\nX,Nope\n", encoding="utf-8")
    assert main(["simulate", "--catalog", str(bad), "--out", str(tmp_path / "b")]) == 13
    assert main(["simulate", "--catalog", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "b")]) == 11
    assert main(["simulate"]) == 10


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text(f'{CONFIG_TAG}\nseed = 5\nnoise = 0.0\nout = "{tmp_path / "a"}"\n', encoding="utf-8")
    assert main(["simulate", "--config", str(cfg)]) == 0
    resolved = read_config(tmp_path / "a" / "resolved_config.txt", ["catalog", "out", "seed", "noise"])
    assert resolved["seed"] == 5 and resolved["noise"] == 0.0
    assert main(["simulate", "--config", str(cfg), "--seed", "6", "--out", str(tmp_path / "b")]) == 0
    assert read_config(tmp_path / "b" / "resolved_config.txt", ["catalog", "out", "seed", "noise"])["seed"] == 6
    cfg.write_text(f"{CONFIG_TAG}\nbogus = 1\n", encoding="utf-8")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "c")]) == 10
    cfg.write_text("seed = 1\n", encoding="utf-8")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "c")]) == 10


def test_train_artifacts(run_dir):
    for name in ("model.ckpt", "training_log.csv", "resolved_config.txt", "split.txt", "train_index.csv"):
        assert (run_dir / name).is_file()
    split = (run_dir / "split.txt").read_text()
    assert '"Batt-9"' in split.splitlines()[-1]
    idx = _rows(run_dir / "train_index.csv")
    assert not {r["scenario_id"] for r in idx} & {"Batt-9", "Batt-12"}
    assert len(_rows(run_dir / "training_log.csv")) == 3


def test_train_zero_lambda_equals_lstm(sim_dir, tmp_path):
    args = ["--data", str(sim_dir), "--holdout", "Batt-9,Batt-12", *SMALL]
    assert main(["train", "--out", str(tmp_path / "pi"), "--model", "pi-lstm", "--lambda", "0", *args]) == 0
    assert main(["train", "--out", str(tmp_path / "l"), "--model", "lstm", *args]) == 0
    assert (tmp_path / "pi" / "model.ckpt").read_bytes() == (tmp_path / "l" / "model.ckpt").read_bytes()


def test_train_errors(sim_dir, tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "o")]) == 11
    assert "nowhere" in capsys.readouterr().err
    assert main(["train", "--data", str(sim_dir), "--out", str(tmp_path / "o"), "--holdout", "Batt-99", *SMALL]) == 12
    assert main(["train", "--out", str(tmp_path / "o")]) == 10
    assert main(["train", "--data", str(sim_dir), "--out", str(tmp_path / "o"), "--model", "gru"]) == 10


def test_evaluate_run(run_dir, tmp_path):
    assert main(["evaluate", "--run", str(run_dir)]) == 0
    first = (run_dir / "metrics.csv").read_bytes()
    preds = _rows(run_dir / "predictions.csv")
    assert list(preds[0]) == ["time_s", "actual_C", "predicted_C", "scenario"]
    assert {r["scenario"] for r in preds} == {"Batt-9", "Batt-12"}
    assert main(["evaluate", "--run", str(run_dir)]) == 0
    assert (run_dir / "metrics.csv").read_bytes() == first
    for r in _rows(run_dir / "metrics.csv"):
        assert float(r["mae_C"]) <= float(r["rmse_C"])


def test_evaluate_checkpoint_and_errors(run_dir, sim_dir, tmp_path):
    out = tmp_path / "ev"
    assert main(["evaluate", "--checkpoint", str(run_dir / "model.ckpt"), "--data", str(sim_dir),
                 "--scenarios", "Batt-1", "--out", str(out)]) == 0
    assert {r["scenario"] for r in _rows(out / "predictions.csv")} == {"Batt-1"}
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint")
    assert main(["evaluate", "--checkpoint", str(bad), "--data", str(sim_dir), "--out", str(out)]) == 14
    assert main(["evaluate"]) == 10


def test_compare_checkpoints(run_dir, sim_dir, tmp_path):
    ck = str(run_dir / "model.ckpt")
    out = tmp_path / "cmp"
    assert main(["compare", "--checkpoint", ck, "--checkpoint", ck, "--name", "b", "--name", "a",
                 "--data", str(sim_dir), "--scenarios", "Batt-9", "--out", str(out)]) == 0
    rows = _rows(out / "comparison.csv")
    assert [r["Model"] for r in rows] == ["a", "b"]
    assert list(rows[0]) == ["Model", "MAE", "RMSE", "R2", "best"]
    assert main(["compare", "--checkpoint", ck, "--data", str(sim_dir), "--out", str(out)]) == 10


def test_compare_holdout(sim_dir, tmp_path):
    out = tmp_path / "cmp"
    assert main(["compare", "--data", str(sim_dir), "--holdout", "Batt-9,Batt-12", "--epochs", "1",
                 "--out", str(out)]) == 0
    for cell in ("Batt-9", "Batt-12"):
        rows = _rows(out / f"comparison_{cell}.csv")
        assert sorted(r["Model"] for r in rows) == ["lstm", "mlp", "pi-lstm"]
        maes = [float(r["MAE"]) for r in rows]
        assert maes == sorted(maes)
    assert (out / "pi-lstm.ckpt").is_file()


def test_warn_exit_codes(sim_dir, tmp_path, capsys):
    assert main(["warn", "--trace", str(sim_dir / "Batt-12.csv")]) == 3
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[-1].split(",")[0] == "3"
    benign = tmp_path / "benign.csv"
    quiet = make_trace(40, temp=np.full(40, 25.0))
    quiet.force_kN[:] = 0.3
    quiet.short_circuit[:] = 0.0
    write_trace_csv(quiet, benign)
    out = tmp_path / "e.csv"
    assert main(["warn", "--trace", str(benign), "--out", str(out)]) == 0
    assert out.read_text().splitlines() == ["level,time_s,trigger_value,cause,source"]
    assert main(["warn", "--trace", str(tmp_path / "none.csv")]) == 11
    assert main(["warn", "--trace", str(benign), "--predict"]) == 10


def test_warn_predict_column(sim_dir, run_dir, tmp_path):
    out = tmp_path / "e.csv"
    code = main(["warn", "--trace", str(sim_dir / "Batt-12.csv"), "--checkpoint", str(run_dir / "model.ckpt"),
                 "--predict", "--out", str(out)])
    assert code == 3
    assert out.read_text().splitlines()[0].endswith(",lead_time_s")


def test_report(run_dir, tmp_path, capsys):
    assert main(["evaluate", "--run", str(run_dir)]) == 0
    assert main(["report", "--run", str(run_dir)]) == 0
    rep = run_dir / "report"
    assert {p.name for p in rep.iterdir()} == {"loss_curves.csv", "actual_vs_predicted.csv", "warning_timeline.csv"}
    curves = _rows(rep / "loss_curves.csv")
    assert {r["split"] for r in curves} == {"train", "val"} and len(curves) == 3 * 2 * 3
    assert len(_rows(rep / "actual_vs_predicted.csv")) == len(_rows(run_dir / "predictions.csv"))
    timeline = _rows(rep / "warning_timeline.csv")
    assert any(r["level"] == "3" and r["scenario"] == "Batt-12" for r in timeline)


def test_report_partial_and_missing(run_dir, tmp_path, capsys):
    partial = tmp_path / "partial"
    partial.mkdir()
    (partial / "training_log.csv").write_bytes((run_dir / "training_log.csv").read_bytes())
    assert main(["report", "--run", str(partial)]) == 0
    assert "warning" in capsys.readouterr().err
    assert [p.name for p in (partial / "report").iterdir()] == ["loss_curves.csv"]
    assert main(["report", "--run", str(tmp_path / "empty")]) == 11


def test_exit_code_table():
    assert exit_code_for(errors.BadCatalog("x")) == 13
    assert exit_code_for(errors.CheckpointError("x")) == 14
    assert exit_code_for(errors.Diverged("x")) == 15
    assert exit_code_for(errors.NonUniformSampling("x")) == 12
    assert exit_code_for(FileNotFoundError("x")) == 11
    assert exit_code_for(RuntimeError("x")) == 19
    assert set(EXIT_CODES) == {0, 1, 2, 3, 10, 11, 12, 13, 14, 15, 19}


def test_help_and_version(capsys):
    assert main(["--help"]) == 0
    assert "benchmark" in capsys.readouterr().out


def test_digest_stable():
    assert digest({"b": 1, "a": [1, 2]}) == digest({"a": [1, 2], "b": 1})
