"""Least-squares recovery of law coefficients from (x, y) samples.

Exponential laws are fitted in log space, logarithmic laws against ln(x),
the collapse-displacement law as a quadratic in ln(v).  The collapse-time
law has an additive offset, so it is solved by variable projection over the
exponent followed by a Levenberg-Marquardt polish.  ``residual_rms`` is
always reported in the original units of ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from pilstm.errors import DomainViolation, SingularSystem


class Law(str, Enum):
    POSITION_FORCE = "position_force"  # F_max exp(-lambda_pos x*)
    WORK_TEMPERATURE = "work_temperature"  # T0 + alpha W
    COLLAPSE_TIME = "collapse_time"  # t0 + C exp(lambda x*)
    SPEED_FORCE = "speed_force"  # F0 + k ln(v / v0)
    COLLAPSE_DISPLACEMENT = "collapse_displacement"  # a + b ln v + c ln^2 v
    RADIUS_FORCE_EXP = "radius_force_exp"  # F_max exp(-lambda_r r)
    RADIUS_FORCE_LINEAR = "radius_force_linear"  # F0 + k_r r
    FAILURE_TIME_RADIUS = "failure_time_radius"  # t0 - beta r
    VOLTAGE_DROP = "voltage_drop"  # dV_per_soc * soc
    SOC_TEMPERATURE = "soc_temperature"  # T0 + k ln(soc / soc_ref)


@dataclass(frozen=True)
class FitResult:
    law: Law
    params: dict[str, float]
    residual_rms: float
    n_points: int
    stderr: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.residual_rms < 0:
            raise ValueError("residual_rms must be non-negative")
        if self.n_points < len(self.params):
            raise ValueError("fewer points than coefficients")


def _linear(A: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, k = A.shape
    if n < k:
        raise SingularSystem(f"{n} points cannot determine {k} coefficients")
    coef, _, rank, _ = np.linalg.lstsq(A, z, rcond=None)
    if rank < k:
        raise SingularSystem("design matrix is rank deficient")
    dof = n - k
    resid = z - A @ coef
    if dof > 0:
        s2 = float(resid @ resid) / dof
        cov = s2 * np.linalg.inv(A.T @ A)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    else:
        se = np.full(k, np.nan)
    return coef, se


def _positive(a: np.ndarray, what: str) -> np.ndarray:
    if np.any(a <= 0):
        raise DomainViolation(f"{what} must be positive for this law")
    return a


def _fit_offset_exponential(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """y = t0 + C exp(lam x), returns ((t0, C, lam), stderr)."""
    if len(x) < 3:
        raise SingularSystem(f"{len(x)} points cannot determine 3 coefficients")
    if np.ptp(x) == 0:
        raise SingularSystem("abscissas are all equal")
    scale = 1.0 / np.ptp(x)

    def project(lam: float) -> tuple[float, np.ndarray]:
        A = np.column_stack([np.ones_like(x), np.exp(lam * x)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        r = y - A @ coef
        return float(r @ r), coef

    grid = np.linspace(-20.0, 20.0, 401) * scale
    costs = [project(g)[0] for g in grid]
    j = int(np.argmin(costs))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
    lam = minimize_scalar(lambda g: project(g)[0], bounds=(lo, hi), method="bounded", options={"xatol": 1e-14}).x
    _, (t0, C) = project(lam)

    def resid(theta):
        return theta[0] + theta[1] * np.exp(theta[2] * x) - y

    sol = least_squares(resid, [t0, C, lam], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    J = sol.jac
    dof = len(x) - 3
    try:
        cov = np.linalg.inv(J.T @ J) * (float(sol.fun @ sol.fun) / dof if dof > 0 else np.nan)
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("collapse-time fit is degenerate") from exc
    return sol.x, se


def fit_law(x, y, law: Law | str, *, ref: float | None = None) -> FitResult:
    """Fit one law to samples.

    ``ref`` is the reference abscissa of the logarithmic laws: ``v0`` for
    ``speed_force`` (default 1) and ``soc_ref`` for ``soc_temperature``
    (default 0.2).
    """
    law = Law(law)
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    one = np.ones_like(x)

    if law is Law.POSITION_FORCE or law is Law.RADIUS_FORCE_EXP:
        coef, se = _linear(np.column_stack([one, -x]), np.log(_positive(y, "y")))
        amp = float(np.exp(coef[0]))
        rate_name = "lambda_pos" if law is Law.POSITION_FORCE else "lambda_r"
        params = {"F_max": amp, rate_name: float(coef[1])}
        stderr = {"F_max": amp * float(se[0]), rate_name: float(se[1])}
        pred = amp * np.exp(-coef[1] * x)
    elif law is Law.COLLAPSE_TIME:
        theta, se = _fit_offset_exponential(x, y)
        params = {"t0_s": float(theta[0]), "C_s": float(theta[1]), "lambda_pos_t": float(theta[2])}
        stderr = dict(zip(params, map(float, se)))
        pred = theta[0] + theta[1] * np.exp(theta[2] * x)
    elif law is Law.SPEED_FORCE:
        v0 = 1.0 if ref is None else float(ref)
        lx = np.log(_positive(x, "speed") / _positive(np.array([v0]), "v0")[0])
        coef, se = _linear(np.column_stack([one, lx]), y)
        params = {"F0": float(coef[0]), "k_log": float(coef[1])}
        stderr = {"F0": float(se[0]), "k_log": float(se[1])}
        pred = coef[0] + coef[1] * lx
    elif law is Law.COLLAPSE_DISPLACEMENT:
        lx = np.log(_positive(x, "speed"))
        coef, se = _linear(np.column_stack([one, lx, lx * lx]), y)
        params = {"a_u": float(coef[0]), "b_u": float(coef[1]), "c_u": float(coef[2])}
        stderr = dict(zip(params, map(float, se)))
        pred = coef[0] + coef[1] * lx + coef[2] * lx * lx
    elif law in (Law.RADIUS_FORCE_LINEAR, Law.FAILURE_TIME_RADIUS, Law.WORK_TEMPERATURE):
        coef, se = _linear(np.column_stack([one, x]), y)
        names = {
            Law.RADIUS_FORCE_LINEAR: ("F0", "k_r", 1.0),
            Law.FAILURE_TIME_RADIUS: ("t_collapse_base", "beta_r", -1.0),
            Law.WORK_TEMPERATURE: ("T0_C", "alpha_W", 1.0),
        }[law]
        params = {names[0]: float(coef[0]), names[1]: names[2] * float(coef[1])}
        stderr = {names[0]: float(se[0]), names[1]: float(se[1])}
        pred = coef[0] + coef[1] * x
    elif law is Law.VOLTAGE_DROP:
        coef, se = _linear(x[:, None], y)
        params = {"dV_per_soc": float(coef[0])}
        stderr = {"dV_per_soc": float(se[0])}
        pred = coef[0] * x
    elif law is Law.SOC_TEMPERATURE:
        soc_ref = 0.2 if ref is None else float(ref)
        lx = np.log(_positive(x, "soc") / soc_ref)
        coef, se = _linear(np.column_stack([one, lx]), y)
        params = {"T0_C": float(coef[0]), "k_soc": float(coef[1])}
        stderr = {"T0_C": float(se[0]), "k_soc": float(se[1])}
        pred = coef[0] + coef[1] * lx
    else:  # pragma: no cover
        raise ValueError(f"unsupported law {law}")

    rms = float(np.sqrt(np.mean((y - pred) ** 2)))
    return FitResult(law=law, params=params, residual_rms=rms, n_points=len(x), stderr=stderr)
