"""Severity scoring of abuse scenarios and the three-level thermal-runaway warning ladder.

Levels: 1 mechanical collision (force step above a trailing baseline),
2 internal short circuit (steep voltage drop or the short-circuit flag),
3 temperature at or above the SEI-decomposition threshold.  Each level fires
at most once per trace and a level never fires after a higher one, so the
event list is increasing in level and time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from pilstm.data import Trace, denormalize_channel, fmt_float, normalize_matrix
from pilstm.errors import NonPositiveSOC, ShapeMismatch, ZeroCollapseTime
from pilstm.neural.model import SequenceModel, forward_multi
from pilstm.sim.laws import LawParams
from pilstm.sim.scenarios import AbuseScenario, preset_catalog
from pilstm.sim.synth import scenario_response, synthesize_trace


@lru_cache(maxsize=1)
def default_t_ref() -> float:
    """Median noiseless collapse time over the preset catalog, in seconds."""
    return float(np.median([scenario_response(s).t_collapse for s in preset_catalog(noise_scale=0.0)]))


@dataclass(frozen=True)
class SeverityInputs:
    F_peak: float
    T_peak: float
    dV: float
    t_collapse: float
    F_ref: float = 10.0
    T_ref: float = 140.0
    dV_ref: float = 4.2
    t_ref: float | None = None
    w_F: float = 0.25
    w_T: float = 0.25
    w_V: float = 0.25
    w_t: float = 0.25

    def __post_init__(self) -> None:
        if self.t_ref is None:
            object.__setattr__(self, "t_ref", default_t_ref())
        if min(self.F_ref, self.T_ref, self.dV_ref, self.t_ref) <= 0:
            raise ValueError("reference values must be positive")
        if min(self.w_F, self.w_T, self.w_V, self.w_t) < 0:
            raise ValueError("weights must be non-negative")
        if not self.t_collapse > 0:
            raise ZeroCollapseTime(f"collapse time must be positive, got {self.t_collapse}")


def severity_index(inp: SeverityInputs) -> float:
    """w_F F/F_ref + w_T T/T_ref + w_V dV/dV_ref + w_t t_ref/t_collapse.

    A trace without collapse (``t_collapse = inf``) gets no collapse term.
    """
    return (
        inp.w_F * inp.F_peak / inp.F_ref
        + inp.w_T * inp.T_peak / inp.T_ref
        + inp.w_V * inp.dV / inp.dV_ref
        + inp.w_t * inp.t_ref / inp.t_collapse
    )


def extract_severity_inputs(trace: Trace, **refs) -> SeverityInputs:
    """Peak force, peak temperature, total voltage drop and first short-circuit time."""
    flagged = np.flatnonzero(trace.short_circuit > 0.5)
    t_c = float(trace.time_s[flagged[0]]) if len(flagged) else math.inf
    v = trace.voltage_V
    return SeverityInputs(
        F_peak=float(np.nanmax(trace.force_kN)),
        T_peak=float(np.nanmax(trace.temperature_C)),
        dV=float(v[0] - np.nanmin(v)),
        t_collapse=t_c,
        **refs,
    )


def scenario_severity(s: AbuseScenario, p: LawParams | None = None, **refs) -> float:
    """Severity of the noiseless synthesized trace of ``s``."""
    quiet = replace(s, noise_std={k: 0.0 for k in s.noise_std})
    return severity_index(extract_severity_inputs(synthesize_trace(quiet, p), **refs))


def severity_vs_soc(template: AbuseScenario, socs: Iterable[float], p: LawParams | None = None, **refs) -> list[tuple[float, float]]:
    out = []
    for soc in socs:
        soc = float(soc)
        if soc <= 0:
            raise NonPositiveSOC("severity needs soc > 0")
        if soc > 1:
            raise ValueError("soc must not exceed 1")
        out.append((soc, scenario_severity(replace(template, soc_frac=soc), p, **refs)))
    return out


class Cause(str, Enum):
    COLLISION = "MechanicalCollision"
    SHORT_CIRCUIT = "InternalShortCircuit"
    SEI = "SeiDecompositionThreshold"


CAUSES = {1: Cause.COLLISION, 2: Cause.SHORT_CIRCUIT, 3: Cause.SEI}


@dataclass(frozen=True)
class WarnThresholds:
    collision_kN: float = 0.5  # above the trailing minimum
    baseline_s: float = 10.0
    voltage_step_V: float = -0.5  # per sample
    temperature_C: float = 130.0  # inclusive
    use_short_flag: bool = True
    horizon: int = 30  # predictive look-ahead, samples


@dataclass(frozen=True)
class WarningEvent:
    level: int
    time_s: float
    trigger_value: float
    cause: Cause
    sample: int = -1
    source: str = "measured"
    lead_time_s: float | None = None  # predicted crossing time minus alarm time

    def __post_init__(self) -> None:
        if self.level not in CAUSES:
            raise ValueError(f"level must be 1, 2 or 3, got {self.level}")


def warn(trace: Trace, thresholds: WarnThresholds | None = None) -> list[WarningEvent]:
    """Reactive ladder on measured channels, evaluated sample by sample."""
    th = thresholds or WarnThresholds()
    F, V, T, sc, t = trace.force_kN, trace.voltage_V, trace.temperature_C, trace.short_circuit, trace.time_s
    dt = trace.dt_s if trace.dt_s and trace.dt_s > 0 else 1.0
    back = max(int(round(th.baseline_s / dt)), 1)
    events: list[WarningEvent] = []
    top = 0
    for k in range(len(trace)):
        if top < 1 and k > 0:
            past = F[max(0, k - back) : k]
            past = past[np.isfinite(past)]
            if len(past) and F[k] - past.min() > th.collision_kN:
                events.append(WarningEvent(1, float(t[k]), float(F[k]), Cause.COLLISION, k))
                top = 1
        if top < 2:
            step = V[k] - V[k - 1] if k > 0 else np.nan
            flag = th.use_short_flag and sc[k] > 0.5
            if step < th.voltage_step_V or flag:
                events.append(WarningEvent(2, float(t[k]), float(V[k]), Cause.SHORT_CIRCUIT, k))
                top = 2
        if top < 3 and T[k] >= th.temperature_C:
            events.append(WarningEvent(3, float(t[k]), float(T[k]), Cause.SEI, k))
            top = 3
    return events


class PredictiveWarner:
    """Streaming level-3 alarm on the model's multi-step temperature forecast.

    Rows arrive in raw units in feature order; nothing is predicted until
    ``n`` rows are buffered.  The alarm fires once, at the first row whose
    forecast reaches the threshold within the horizon.
    """

    def __init__(self, model: SequenceModel, thresholds: WarnThresholds | None = None, dt_s: float = 0.2) -> None:
        if model.norm is None:
            raise ShapeMismatch("predictive warnings need a checkpoint with normalization parameters")
        if model.d != len(model.norm.channels):
            raise ShapeMismatch(f"model width {model.d} does not match {len(model.norm.channels)} channels")
        self.model = model
        self.th = thresholds or WarnThresholds()
        self.dt = dt_s
        self._buf: list[np.ndarray] = []
        self._k = -1
        self.fired = False
        self.forecasts: list[tuple[float, np.ndarray]] = []

    def push(self, time_s: float, row: Sequence[float]) -> WarningEvent | None:
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (self.model.d,):
            raise ShapeMismatch(f"row of width {row.shape} does not match model width {self.model.d}")
        self._k += 1
        self._buf.append(row)
        if len(self._buf) > self.model.n:
            self._buf.pop(0)
        if self.fired or len(self._buf) < self.model.n:
            return None
        window = normalize_matrix(np.vstack(self._buf), self.model.norm)
        forecast = denormalize_channel(forward_multi(window, self.model, self.th.horizon), self.model.norm)
        self.forecasts.append((float(time_s), forecast))
        hits = np.flatnonzero(forecast >= self.th.temperature_C)
        if not len(hits):
            return None
        self.fired = True
        k = int(hits[0])
        return WarningEvent(
            3, float(time_s), float(forecast[k]), Cause.SEI, self._k, "predicted", (k + 1) * self.dt,
        )


def warn_predictive(model: SequenceModel, trace: Trace, thresholds: WarnThresholds | None = None) -> list[WarningEvent]:
    """Replay ``trace`` through a :class:`PredictiveWarner`."""
    w = PredictiveWarner(model, thresholds, trace.dt_s if trace.dt_s else 0.2)
    m = trace.feature_matrix()
    out = []
    for k in range(len(trace)):
        ev = w.push(float(trace.time_s[k]), m[k])
        if ev is not None:
            out.append(ev)
    return out


EVENT_HEADER = ("level", "time_s", "trigger_value", "cause", "source")


def write_events(events: Sequence[WarningEvent], path: str | Path, lead_time: bool = False) -> None:
    header = EVENT_HEADER + (("lead_time_s",) if lead_time else ())
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for e in events:
            row = [e.level, fmt_float(e.time_s), fmt_float(e.trigger_value), e.cause.value, e.source]
            if lead_time:
                row.append("" if e.lead_time_s is None else fmt_float(e.lead_time_s))
            w.writerow(row)


def read_events(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
