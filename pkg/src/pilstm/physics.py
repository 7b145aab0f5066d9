"""Heat-diffusion residual on predicted temperature sequences and the combined loss.

For a sequence of predictions ``T`` sampled every ``dt`` the residual at an
interior index ``t`` is

    r_t = (T[t+1] - T[t]) / dt - alpha * (T[t+1] - 2 T[t] + T[t-1])

and the physics loss is the mean of ``r_t**2`` over the ``N - 2`` interior
points.  ``alpha`` is a lumped coefficient in normalized units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from pilstm.errors import LengthMismatch, TooShort


@dataclass(frozen=True)
class PhysicsConfig:
    alpha_diff: float = 0.1
    dt_s: float = 0.2
    lambda_weight: float = 0.1

    def __post_init__(self) -> None:
        if not self.dt_s > 0:
            raise ValueError("dt_s must be positive")
        if self.alpha_diff < 0 or self.lambda_weight < 0:
            raise ValueError("alpha_diff and lambda_weight must be non-negative")


def _seq(T_hat) -> np.ndarray:
    T = np.asarray(T_hat, dtype=np.float64).ravel()
    if len(T) < 3:
        raise TooShort(f"residuals need at least 3 points, got {len(T)}")
    return T


def physics_residuals(T_hat, cfg: PhysicsConfig) -> np.ndarray:
    T = _seq(T_hat)
    nxt, cur, prev = T[2:], T[1:-1], T[:-2]
    return (nxt - cur) / cfg.dt_s - cfg.alpha_diff * (nxt - 2.0 * cur + prev)


def physics_loss(T_hat, cfg: PhysicsConfig) -> float:
    r = physics_residuals(T_hat, cfg)
    return float(np.mean(r * r))


def physics_loss_grad(T_hat, cfg: PhysicsConfig) -> np.ndarray:
    """d physics_loss / d T_hat, same length as ``T_hat``."""
    T = _seq(T_hat)
    r = physics_residuals(T, cfg)
    w = 2.0 * r / len(r)
    a, inv = cfg.alpha_diff, 1.0 / cfg.dt_s
    g = np.zeros_like(T)
    g[2:] += w * (inv - a)  # T[t+1]
    g[1:-1] += w * (-inv + 2.0 * a)  # T[t]
    g[:-2] += w * (-a)  # T[t-1]
    return g


@dataclass(frozen=True)
class LossBreakdown:
    data_loss: float
    phys_loss: float
    total: float
    n_data: int
    n_residuals: int
    lambda_weight: float = 0.0
    alpha_diff: float = 0.0


def total_loss(
    predictions, targets, T_hat_sequences: Sequence[np.ndarray], cfg: PhysicsConfig
) -> LossBreakdown:
    """Data MSE plus ``lambda`` times the mean physics loss over the sequences.

    Sequences shorter than three points carry no residual and are skipped.
    """
    pred = np.asarray(predictions, dtype=np.float64).ravel()
    targ = np.asarray(targets, dtype=np.float64).ravel()
    if pred.shape != targ.shape:
        raise LengthMismatch(f"{len(pred)} predictions vs {len(targ)} targets")
    data = float(np.mean((pred - targ) ** 2)) if len(pred) else 0.0
    losses, n_res = [], 0
    for seq in T_hat_sequences:
        if len(seq) >= 3:
            losses.append(physics_loss(seq, cfg))
            n_res += len(seq) - 2
    phys = float(np.mean(losses)) if losses else 0.0
    return LossBreakdown(
        data_loss=data,
        phys_loss=phys,
        total=data + cfg.lambda_weight * phys,
        n_data=len(pred),
        n_residuals=n_res,
        lambda_weight=cfg.lambda_weight,
        alpha_diff=cfg.alpha_diff,
    )


def total_loss_grad(
    predictions, targets, segments: Sequence[slice], cfg: PhysicsConfig
) -> tuple[LossBreakdown, np.ndarray]:
    """Loss breakdown and its gradient w.r.t. ``predictions``.

    ``segments`` select the consecutive-prediction runs (one per source
    trace, in time order) that form the physics sequences.  When the physics
    weight is zero the physics term is still reported but contributes
    nothing to the gradient, which is then exactly the data-MSE gradient.
    """
    pred = np.asarray(predictions, dtype=np.float64).ravel()
    targ = np.asarray(targets, dtype=np.float64).ravel()
    if pred.shape != targ.shape:
        raise LengthMismatch(f"{len(pred)} predictions vs {len(targ)} targets")
    m = len(pred)
    grad = 2.0 * (pred - targ) / m
    data = float(np.mean((pred - targ) ** 2))
    usable = [s for s in segments if len(pred[s]) >= 3]
    phys, n_res = 0.0, 0
    k = len(usable)
    for s in usable:
        phys += physics_loss(pred[s], cfg) / k
        n_res += len(pred[s]) - 2
        if cfg.lambda_weight > 0:
            grad[s] += cfg.lambda_weight * physics_loss_grad(pred[s], cfg) / k
    return (
        LossBreakdown(data, phys, data + cfg.lambda_weight * phys, m, n_res, cfg.lambda_weight, cfg.alpha_diff),
        grad,
    )
