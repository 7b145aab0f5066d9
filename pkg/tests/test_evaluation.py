from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import make_trace
from pilstm.data import fit_normalization, windows_from_traces
from pilstm.errors import ScenarioLeakage, ShapeMismatch
from pilstm.evaluation import (
    COMPARISON_HEADER,
    MetricsReport,
    check_no_leakage,
    compare_models,
    compute_metrics,
    evaluate,
    format_comparison,
    format_metrics,
    held_out_eval,
    holdout_split,
    write_comparison,
    write_metrics,
)
from pilstm.neural import SequenceModel
from pilstm.training import TrainConfig


def test_perfect_fit():
    r = compute_metrics([30.0, 40.0, 50.0], [30.0, 40.0, 50.0])
    assert (r.mae_C, r.rmse_C, r.mape_pct, r.r2) == (0.0, 0.0, 0.0, 1.0)


def test_hand_case_three_points():
    r = compute_metrics([1, 2, 3], [2, 2, 2])
    assert r.mae_C == 2 / 3
    assert r.rmse_C == math.sqrt(2 / 3)
    assert r.r2 == 0.0


def test_hand_case_mape():
    r = compute_metrics([1.0, 2.0], [1.1, 1.8])
    assert r.mape_pct == pytest.approx(10.0, rel=1e-12)


def test_constant_targets_degenerate_r2():
    r = compute_metrics([5.0, 5.0, 5.0], [5.0, 6.0, 4.0])
    assert r.r2_degenerate and math.isnan(r.r2)
    assert r.row()["r2"] == "degenerate"


def test_mape_excludes_zero_targets():
    r = compute_metrics([0.0, 2.0], [1.0, 1.0])
    assert r.mape_excluded == 1 and r.mape_pct == pytest.approx(50.0)


def test_metric_shape_errors():
    with pytest.raises(ShapeMismatch):
        compute_metrics([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        compute_metrics([], [])
    with pytest.raises(ValueError):
        MetricsReport(mae_C=2.0, rmse_C=1.0, mape_pct=0.0, r2=0.0, n_samples=3)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-300, 300)), st.integers(0, 10_000))
def test_mae_never_exceeds_rmse(y, seed):
    yh = y + np.random.default_rng(seed).normal(0, 10, len(y))
    r = compute_metrics(y, yh)
    assert r.mae_C <= r.rmse_C * (1 + 1e-12) + 1e-15
    assert math.isnan(r.r2) or r.r2 <= 1.0


def _rep(mae, rmse, r2=0.9):
    return MetricsReport(mae, rmse, 1.0, r2, 10)


def test_compare_sort_and_winners():
    rows = compare_models({"MLP": _rep(13.1, 15.1, 0.99), "PI-LSTM": _rep(0.07, 0.09, 0.9998), "LSTM": _rep(0.36, 0.5, 0.9999)})
    assert [r.model for r in rows] == ["PI-LSTM", "LSTM", "MLP"]
    assert rows[0].best == ("MAE", "RMSE") and rows[1].best == ("R2",)


def test_compare_ties_and_preconditions():
    rows = compare_models({"b": _rep(1.0, 2.0), "a": _rep(1.0, 2.0)})
    assert [r.model for r in rows] == ["a", "b"]
    assert rows[0].best == ("MAE", "RMSE", "R2") and rows[1].best == ()
    with pytest.raises(ValueError):
        compare_models({"only": _rep(1.0, 1.0)})


def test_comparison_files(tmp_path):
    rows = compare_models({"x": _rep(1.0, 2.0), "y": _rep(3.0, 4.0)})
    write_comparison(rows, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == ",".join(COMPARISON_HEADER)
    assert lines[1].startswith("x,1.0,2.0,0.9,")
    assert "x" in format_comparison(rows)


def _data():
    traces = [make_trace(30, scenario_id=f"S{k}", seed=k) for k in range(3)]
    norm = fit_normalization(traces)
    return windows_from_traces(traces, norm, 5)


def test_evaluate_pure_and_per_scenario(tmp_path):
    ds = _data()
    m = SequenceModel.create("lstm", 5, 6, np.random.default_rng(0), hidden=3, norm=ds.params)
    a, b = evaluate(m, ds), evaluate(m, ds)
    assert a == b
    assert set(a.per_scenario) == {"S0", "S1", "S2"}
    assert sum(r.n_samples for r in a.per_scenario.values()) == a.n_samples == len(ds)
    write_metrics(a, tmp_path / "m.csv")
    text = (tmp_path / "m.csv").read_text()
    assert "np.float64" not in text and text.count("\n") == 5
    assert "RMSE" in format_metrics(a)


def test_evaluate_shape_mismatch():
    ds = _data()
    m = SequenceModel.create("lstm", 4, 6, np.random.default_rng(0), hidden=3)
    with pytest.raises(ShapeMismatch):
        evaluate(m, ds)


def test_leakage_guard():
    ds = _data()
    with pytest.raises(ScenarioLeakage):
        check_no_leakage(ds, ["S1"])
    check_no_leakage(ds, ["Batt-9"])


def test_holdout_split_benchmark_partition():
    ids = [f"Batt-{k}" for k in range(1, 14)]
    sp = holdout_split(ids, ("Batt-9", "Batt-12"), 0.2, 7)
    assert sp.test_ids == ["Batt-12", "Batt-9"]
    assert sp.val_ids == ["Batt-2", "Batt-4"]
    assert len(sp.train_ids) == 9
    assert not set(sp.train_ids) & set(sp.val_ids)
    with pytest.raises(KeyError):
        holdout_split(ids, ("Batt-99",))


def test_held_out_eval_small():
    traces = {f"S{k}": make_trace(30, scenario_id=f"S{k}", seed=k) for k in range(5)}
    cfgs = {k: TrainConfig(model_kind=k, epochs_max=2, hidden=3, mlp_widths=(4,), lr=1e-3) for k in ("pi-lstm", "mlp")}
    res = held_out_eval(traces, cfgs, ("S4",), n=5)
    assert set(res.reports["mlp"]) == {"S4"}
    assert "S4" not in res.split.train_ids
    with pytest.raises(ScenarioLeakage):
        leaky = windows_from_traces(list(traces.values()), fit_normalization(list(traces.values())), 5)
        held_out_eval(traces, cfgs, ("S4",), n=5, train_set=leaky)
