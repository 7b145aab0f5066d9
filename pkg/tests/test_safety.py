from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_trace
from pilstm.data import FEATURES, NormalizationParams
from pilstm.errors import NonPositiveSOC, ShapeMismatch, ZeroCollapseTime
from pilstm.neural import LstmParams, SequenceModel
from pilstm.safety import (
    Cause,
    PredictiveWarner,
    SeverityInputs,
    WarnThresholds,
    default_t_ref,
    read_events,
    scenario_severity,
    severity_index,
    severity_vs_soc,
    warn,
    warn_predictive,
    write_events,
)
from pilstm.sim import preset, preset_catalog, synthesize_trace


def _inputs(**kw):
    base = dict(F_peak=10.0, T_peak=140.0, dV=4.2, t_collapse=20.0, t_ref=20.0)
    return SeverityInputs(**{**base, **kw})


def test_severity_normalization_point():
    assert severity_index(_inputs()) == pytest.approx(1.0, rel=1e-15)


def test_severity_collapse_term_inverse():
    full = _inputs(w_F=0, w_T=0, w_V=0, w_t=0.25)
    half = replace(full, t_collapse=10.0)
    assert severity_index(half) == pytest.approx(2 * severity_index(full))
    assert severity_index(_inputs(t_collapse=math.inf, w_t=1.0)) == pytest.approx(0.75)


def test_severity_guards():
    with pytest.raises(ZeroCollapseTime):
        _inputs(t_collapse=0.0)
    with pytest.raises(ValueError):
        _inputs(F_ref=0.0)
    with pytest.raises(ValueError):
        _inputs(w_T=-1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2), st.floats(0, 2), st.floats(0, 2))
def test_severity_linear_in_weight(a, b, w_other):
    s = lambda w: severity_index(_inputs(w_T=w, w_F=w_other, T_peak=77.0))
    assert s(a + b) == pytest.approx(s(a) + s(b) - s(0.0), rel=1e-12, abs=1e-12)


def test_default_t_ref_is_median_collapse():
    assert default_t_ref() == pytest.approx(30.235, abs=1e-3)


def test_severity_preset_ordering():
    s = {sid: scenario_severity(preset(sid)) for sid in ("Batt-12", "Batt-9", "Batt-8")}
    assert s["Batt-12"] > s["Batt-9"] > s["Batt-8"]
    # frozen values of the default generator
    assert s["Batt-12"] == pytest.approx(1.274, abs=2e-3)
    assert s["Batt-9"] == pytest.approx(0.722, abs=2e-3)


def test_severity_vs_soc():
    pairs = severity_vs_soc(preset("Batt-12"), [0.2, 0.4, 0.6, 0.8])
    values = [v for _, v in pairs]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert len(severity_vs_soc(preset("Batt-12"), [0.5])) == 1
    with pytest.raises(NonPositiveSOC):
        severity_vs_soc(preset("Batt-12"), [0.0])


def _quiet(n, **channels):
    tr = make_trace(n)
    tr.force_kN[:] = 1.0
    tr.voltage_V[:] = 3.9
    tr.temperature_C[:] = 25.0
    tr.short_circuit[:] = 0.0
    for k, v in channels.items():
        getattr(tr, k)[:] = v
    return tr


def test_benign_trace_no_events():
    assert warn(_quiet(100)) == []


def test_inclusive_level3_boundary():
    T = np.full(20, 100.0)
    T[7] = 130.0
    T[8:] = 131.0
    ev = warn(_quiet(20, temperature_C=T))
    assert [(e.level, e.sample) for e in ev] == [(3, 7)]
    assert ev[0].trigger_value == 130.0 and ev[0].cause is Cause.SEI


def test_below_threshold_never_level3():
    T = np.linspace(25, 129.99, 50)
    assert all(e.level != 3 for e in warn(_quiet(50, temperature_C=T)))


def test_collision_baseline():
    F = np.full(120, 1.0)
    F[60:] = 1.6
    ev = warn(_quiet(120, force_kN=F))
    assert [(e.level, e.sample) for e in ev] == [(1, 60)]
    # a slow ramp never steps 0.5 kN above any trailing 10 s minimum
    slow = warn(_quiet(120, force_kN=1.0 + 0.004 * np.arange(120)))
    assert slow == []


def test_voltage_step_and_flag():
    V = np.full(30, 3.9)
    V[10:] = 3.0
    ev = warn(_quiet(30, voltage_V=V))
    assert [(e.level, e.sample) for e in ev] == [(2, 10)]
    sc = (np.arange(30) >= 12).astype(float)
    assert [(e.level, e.sample) for e in warn(_quiet(30, short_circuit=sc))] == [(2, 12)]
    no_flag = WarnThresholds(use_short_flag=False)
    assert warn(_quiet(30, short_circuit=sc), no_flag) == []


def test_no_lower_level_after_higher():
    T = np.full(40, 25.0)
    T[5:] = 150.0
    F = np.full(40, 1.0)
    F[20:] = 5.0
    ev = warn(_quiet(40, temperature_C=T, force_kN=F))
    assert [e.level for e in ev] == [3]


def test_preset_ladders():
    for s in preset_catalog():
        tr = synthesize_trace(s)
        ev = warn(tr)
        levels = [e.level for e in ev]
        assert levels == sorted(set(levels))
        assert all(a.time_s <= b.time_s for a, b in zip(ev, ev[1:]))
        crossing = np.flatnonzero(tr.temperature_C >= 130.0)
        l3 = [e for e in ev if e.level == 3]
        if len(crossing):
            assert len(l3) == 1 and l3[0].sample == crossing[0]
        else:
            assert not l3


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([s.id for s in preset_catalog()]), st.integers(2, 400))
def test_warn_causal_prefix(sid, cut):
    tr = synthesize_trace(preset(sid))
    full = warn(tr)
    part = warn(tr.head(min(cut, len(tr))))
    assert part == full[: len(part)]
    assert all(e.sample < min(cut, len(tr)) for e in part)


def _norm():
    return NormalizationParams(np.zeros(6), np.array([1.0, 20.0, 10.0, 4.2, 400.0, 1.0]), FEATURES)


def _constant_model(value_norm, n=5):
    p = LstmParams.zeros(6, 2)
    p = LstmParams.from_arrays({**p.arrays(), "head_b": np.array([value_norm])})
    return SequenceModel("lstm", p, n, 6, _norm())


def test_predictive_constant_model_no_alarm():
    m = _constant_model(25.0 / 400.0)
    assert warn_predictive(m, synthesize_trace(preset("Batt-12"))) == []


def test_predictive_warm_up_and_lead_time():
    m = _constant_model(200.0 / 400.0, n=5)
    w = PredictiveWarner(m, WarnThresholds(horizon=3), dt_s=0.2)
    row = np.zeros(6)
    assert [w.push(0.2 * k, row) for k in range(4)] == [None] * 4
    ev = w.push(0.8, row)
    assert ev.level == 3 and ev.source == "predicted"
    assert ev.lead_time_s == pytest.approx(0.2) and ev.sample == 4
    assert w.push(1.0, row) is None


def test_predictive_shape_errors():
    m = _constant_model(0.1)
    w = PredictiveWarner(m)
    with pytest.raises(ShapeMismatch):
        w.push(0.0, np.zeros(5))
    with pytest.raises(ShapeMismatch):
        PredictiveWarner(SequenceModel("lstm", LstmParams.zeros(6, 2), 5, 6, None))


def test_event_csv_round_trip(tmp_path):
    ev = warn(synthesize_trace(preset("Batt-12")))
    write_events(ev, tmp_path / "e.csv", lead_time=True)
    rows = read_events(tmp_path / "e.csv")
    assert [int(r["level"]) for r in rows] == [e.level for e in ev]
    assert rows[-1]["cause"] == "SeiDecompositionThreshold"
    assert float(rows[-1]["time_s"]) == ev[-1].time_s and rows[-1]["lead_time_s"] == ""
