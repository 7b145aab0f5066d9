"""Compose the response laws into full synthetic abuse-test traces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pilstm.data import Trace
from pilstm.sim import laws
from pilstm.sim.laws import LawParams
from pilstm.sim.scenarios import AbuseScenario, law_params_for

NOISE_CLIP = 3.0


@dataclass(frozen=True)
class ScenarioResponse:
    """Closed-form summary of one scenario before sampling and noise."""

    x_star: float
    F_peak: float
    t_collapse: float
    trigger: str
    u_collapse: float
    work_J: float
    ocv_V: float
    dV: float
    T_peak: float


def scenario_response(s: AbuseScenario, p: LawParams | None = None) -> ScenarioResponse:
    """Peak force, collapse instant, work to failure and peak temperature.

    The collapse instant is the earliest applicable trigger: the position
    time law, the radius failure-time law (localized indenters only), the
    speed-dependent collapse displacement reached at constant speed, or the
    indenter reaching its final depth.
    """
    p = law_params_for(s.mode) if p is None else p
    v = s.velocity_mm_min
    x = s.x_star
    rate = v / 60.0  # mm/s

    F_peak = float(laws.peak_force_position(x, p)) * float(laws.peak_force_speed(v, p)) / p.F0
    triggers = {
        "position-time": float(laws.collapse_time_position(x, p)),
        "displacement": float(laws.collapse_displacement_speed(v, p)) / rate,
        "depth": s.depth_mm / rate,
    }
    if s.mode.localized:
        F_peak *= float(laws.peak_force_radius(s.radius_mm, p)) / float(laws.peak_force_radius(p.r_ref_mm, p))
        triggers["radius-time"] = float(laws.failure_time_radius(s.radius_mm, p))
    positive = {k: t for k, t in triggers.items() if t > 0}
    if not positive:
        raise ValueError(f"{s.id}: no positive collapse trigger")
    trigger = min(positive, key=positive.get)
    t_c = positive[trigger]
    u_c = rate * t_c
    W = laws.mechanical_work([0.0, u_c], [p.F_contact_kN, F_peak])
    rise = (
        float(laws.peak_temperature_from_work(W, p, v)) - p.T0_C
        + float(laws.peak_temperature_soc(s.soc_frac, p)) - p.T0_C
    )
    return ScenarioResponse(
        x_star=x,
        F_peak=F_peak,
        t_collapse=t_c,
        trigger=trigger,
        u_collapse=u_c,
        work_J=W,
        ocv_V=float(laws.open_circuit_voltage(s.soc_frac, p)),
        dV=float(laws.voltage_drop_soc(s.soc_frac, p)),
        T_peak=p.T0_C + max(rise, 0.0),
    )


def _noise(seed: int, channel: int, size: int) -> np.ndarray:
    # Counter-based stream per (scenario seed, channel): reproducible and
    # independent of the order in which scenarios are synthesized.
    rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, channel]))
    return np.clip(rng.standard_normal(size), -NOISE_CLIP, NOISE_CLIP)


def synthesize_trace(s: AbuseScenario, p: LawParams | None = None) -> Trace:
    """Sample the composed laws on ``[0, duration]`` at ``dt`` and add noise.

    Phases: linear force rise to the peak at collapse, a one-sample hold,
    then exponential softening to a residual level; voltage at OCV until the
    first sample at or after collapse and then a three-sample drop of ``dV``;
    temperature at T0 until collapse followed by a bounded logistic rise to
    ``T_peak`` over ``rise_s``.  Noise is Gaussian truncated at 3 sigma.
    """
    p = law_params_for(s.mode) if p is None else p
    r = scenario_response(s, p)
    dt = s.dt_s
    rows = int(math.floor(s.duration_s / dt + 1e-9)) + 1
    k = np.arange(rows)
    t = k * dt
    t_c = r.t_collapse

    span = r.F_peak - p.F_contact_kN
    after = t - t_c - dt
    force = np.where(
        t < t_c,
        p.F_contact_kN + span * t / t_c,
        np.where(
            after <= 0,
            r.F_peak,
            r.F_peak * (p.F_residual_frac + (1 - p.F_residual_frac) * np.exp(-np.maximum(after, 0) / p.tau_soften_s)),
        ),
    )

    k_c = int(math.ceil(t_c / dt - 1e-9))
    steps = np.clip(k - k_c + 1, 0, 3) / 3.0
    voltage = r.ocv_V - r.dV * steps
    short = (k >= k_c).astype(np.float64)
    temperature = p.T0_C + (r.T_peak - p.T0_C) * laws.logistic_ramp((t - t_c) / p.rise_s, p.rise_steepness)

    noise = s.noise_std
    channels = {"force_kN": force, "voltage_V": voltage, "temperature_C": temperature}
    for j, (name, arr) in enumerate(channels.items()):
        sd = float(noise.get(name, 0.0))
        if sd > 0:
            channels[name] = arr + sd * _noise(s.seed, j, rows)

    return Trace(
        time_s=t,
        soc_frac=np.full(rows, s.soc_frac),
        speed_mm_min=np.full(rows, s.velocity_mm_min),
        short_circuit=short,
        dt_s=dt,
        scenario_id=s.id,
        **channels,
    )
