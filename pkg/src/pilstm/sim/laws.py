"""Closed-form mechanical, electrical and thermal response laws of an 18650 cell.

Each function is pure and total on its documented domain.  Coefficients live
in :class:`LawParams`; every field can be overridden with
``dataclasses.replace``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from pilstm.errors import (
    NonPhysicalTime,
    NonPositiveSOC,
    NonPositiveSpeed,
    UnsortedDisplacement,
)


@dataclass(frozen=True)
class LawParams:
    # peak force vs normalized axial distance from mid-height
    F_max: float = 4.77
    lambda_pos: float = 0.5
    # voltage-collapse time vs position; the exponent sign is configurable
    t0_s: float = 24.0
    C_s: float = 6.0
    lambda_pos_t: float = 0.5
    collapse_sign: float = 1.0
    # peak force vs indenter radius (exponential or linear form)
    lambda_r: float = -0.02
    k_r: float = 0.1
    r_ref_mm: float = 5.0
    radius_form: str = "exp"
    # peak force vs loading speed
    F0: float = 4.77
    k_log: float = 0.0
    v0: float = 10.0
    # temperature rise from mechanical work, with rate-dependent efficiency
    alpha_W: float = 8.0
    eta0: float = 0.8
    c_eta: float = 0.02
    # collapse displacement vs speed, quadratic in ln v
    a_u: float = 4.0
    b_u: float = 1.5
    c_u: float = -0.2
    # failure time vs indenter radius
    t_collapse_base: float = 45.0
    beta_r: float = 0.5
    # SOC laws
    k_soc: float = 20.0
    soc_ref: float = 0.2
    dV_per_soc: float = 2.0
    ocv_empty_V: float = 3.0
    ocv_full_V: float = 4.2
    T0_C: float = 25.0
    # trace shape conventions
    F_contact_kN: float = 0.2
    F_residual_frac: float = 0.35
    tau_soften_s: float = 4.0
    rise_s: float = 15.0
    rise_steepness: float = 8.0

    def __post_init__(self) -> None:
        if self.F_max <= 0:
            raise ValueError("F_max must be positive")
        if self.lambda_pos < 0:
            raise ValueError("lambda_pos must be non-negative")
        if self.v0 <= 0:
            raise ValueError("v0 must be positive")
        if self.radius_form not in ("exp", "linear"):
            raise ValueError("radius_form must be 'exp' or 'linear'")
        if self.soc_ref <= 0:
            raise ValueError("soc_ref must be positive")
        if self.rise_s <= 0 or self.tau_soften_s <= 0:
            raise ValueError("rise_s and tau_soften_s must be positive")

    def as_dict(self) -> dict:
        return asdict(self)


def peak_force_position(x_star, p: LawParams):
    """F_max * exp(-lambda_pos * x*), x* = normalized distance from mid-height."""
    x_star = np.asarray(x_star, dtype=np.float64)
    if np.any(x_star < 0):
        raise ValueError("x_star must be non-negative")
    return p.F_max * np.exp(-p.lambda_pos * x_star)


def collapse_time_position(x_star, p: LawParams):
    """t0 + C * exp(sign * lambda_pos_t * x*) in seconds."""
    x_star = np.asarray(x_star, dtype=np.float64)
    if np.any(x_star < 0):
        raise ValueError("x_star must be non-negative")
    return p.t0_s + p.C_s * np.exp(p.collapse_sign * p.lambda_pos_t * x_star)


def _check_speed(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if np.any(v <= 0):
        raise NonPositiveSpeed("speed must be positive")
    return v


def peak_force_speed(v, p: LawParams):
    """F0 + k_log * ln(v / v0)."""
    v = _check_speed(v)
    return p.F0 + p.k_log * np.log(v / p.v0)


def conversion_efficiency(v, p: LawParams):
    """eta0 + c_eta * ln(v / v0), kept inside (0, 1]."""
    v = _check_speed(v)
    return np.clip(p.eta0 + p.c_eta * np.log(v / p.v0), 1e-6, 1.0)


def mechanical_work(u, force, u_f: float | None = None) -> float:
    """Trapezoidal area under F(u) from 0 to ``u_f``; kN*mm equals joules.

    ``u`` must be non-decreasing.  When ``u_f`` falls between samples the
    curve is linearly interpolated there; samples beyond ``u_f`` are ignored.
    """
    u = np.asarray(u, dtype=np.float64)
    force = np.asarray(force, dtype=np.float64)
    if u.shape != force.shape:
        raise ValueError("u and force must have the same length")
    if np.any(np.diff(u) < 0):
        raise UnsortedDisplacement("displacements must be non-decreasing")
    if u_f is None:
        u_f = float(u[-1]) if len(u) else 0.0
    if len(u) < 2 or u_f <= u[0]:
        return 0.0
    keep = u < u_f
    uu = np.append(u[keep], u_f)
    ff = np.append(force[keep], np.interp(u_f, u, force))
    return float(np.trapezoid(ff, uu))


def peak_temperature_from_work(W, p: LawParams, v=None):
    """T0 + alpha * W; alpha is scaled by eta(v) when a speed is given."""
    W = np.asarray(W, dtype=np.float64)
    if np.any(W < 0):
        raise ValueError("work must be non-negative")
    alpha = p.alpha_W if v is None else p.alpha_W * conversion_efficiency(v, p)
    return p.T0_C + alpha * W


def collapse_displacement_speed(v, p: LawParams):
    """a + b ln v + c (ln v)^2 in millimetres."""
    lv = np.log(_check_speed(v))
    return p.a_u + p.b_u * lv + p.c_u * lv * lv


def peak_force_radius(r, p: LawParams, form: str | None = None):
    """Exponential F_max exp(-lambda_r r) or linear F0 + k_r r."""
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0):
        raise ValueError("radius must be positive")
    form = p.radius_form if form is None else form
    if form == "exp":
        return p.F_max * np.exp(-p.lambda_r * r)
    if form == "linear":
        return p.F0 + p.k_r * r
    raise ValueError(f"unknown radius form {form!r}")


def failure_time_radius(r, p: LawParams):
    """t0 - beta r; raises NonPhysicalTime when the result is not positive."""
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0):
        raise ValueError("radius must be positive")
    t = p.t_collapse_base - p.beta_r * r
    if np.any(t <= 0):
        raise NonPhysicalTime(f"failure time {t} s is not positive")
    return t


def open_circuit_voltage(soc, p: LawParams):
    soc = np.asarray(soc, dtype=np.float64)
    return p.ocv_empty_V + (p.ocv_full_V - p.ocv_empty_V) * soc


def voltage_drop_soc(soc, p: LawParams):
    """dV_per_soc * SOC, capped at the pre-failure open-circuit voltage."""
    soc = np.asarray(soc, dtype=np.float64)
    if np.any((soc < 0) | (soc > 1)):
        raise ValueError("soc must lie in [0, 1]")
    return np.minimum(p.dV_per_soc * soc, open_circuit_voltage(soc, p))


def peak_temperature_soc(soc, p: LawParams):
    """T0 + k_soc ln(soc / soc_ref)."""
    soc = np.asarray(soc, dtype=np.float64)
    if np.any(soc <= 0):
        raise NonPositiveSOC("ln(SOC) law needs soc > 0")
    return p.T0_C + p.k_soc * np.log(soc / p.soc_ref)


def logistic_ramp(s, steepness: float):
    """Monotone logistic rise with g(s<=0) = 0 and g(s>=1) = 1 exactly."""
    s = np.asarray(s, dtype=np.float64)
    lo = 1.0 / (1.0 + math.exp(steepness / 2))
    hi = 1.0 / (1.0 + math.exp(-steepness / 2))
    g = (1.0 / (1.0 + np.exp(-steepness * (np.clip(s, 0.0, 1.0) - 0.5))) - lo) / (hi - lo)
    return np.where(s <= 0.0, 0.0, np.where(s >= 1.0, 1.0, g))
