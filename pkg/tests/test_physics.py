from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradcheck import physics_grad_error
from pilstm.errors import LengthMismatch, TooShort
from pilstm.physics import (
    PhysicsConfig,
    physics_loss,
    physics_loss_grad,
    physics_residuals,
    total_loss,
    total_loss_grad,
)

CFG = PhysicsConfig()
seqs = arrays(np.float64, st.integers(3, 30), elements=st.floats(-10, 10))


def test_constant_sequence():
    T = np.full(8, 3.7)
    assert np.all(physics_residuals(T, CFG) == 0.0)
    assert physics_loss(T, CFG) == 0.0
    assert np.all(physics_loss_grad(T, CFG) == 0.0)


def test_hand_case():
    cfg = PhysicsConfig(alpha_diff=0.5, dt_s=1.0)
    assert physics_residuals([0.0, 1.0, 2.0], cfg).tolist() == [1.0]
    assert physics_loss([0.0, 1.0, 2.0], cfg) == 1.0


def test_linear_sequence():
    m, dt = 0.3, 0.2
    T = 1.0 + m * np.arange(10)
    cfg = PhysicsConfig(alpha_diff=0.7, dt_s=dt)
    assert physics_loss(T, cfg) == pytest.approx(m**2 / dt**2, rel=1e-12)


def test_too_short():
    with pytest.raises(TooShort):
        physics_residuals([1.0, 2.0], CFG)
    with pytest.raises(TooShort):
        physics_loss_grad([1.0], CFG)


def test_residual_count():
    assert len(physics_residuals(np.arange(7.0), CFG)) == 5


def test_endpoint_gradient_support():
    cfg = PhysicsConfig(alpha_diff=0.3, dt_s=0.5)
    T = np.array([0.2, -1.0, 0.7, 1.1, 0.4])
    r = physics_residuals(T, cfg)
    g = physics_loss_grad(T, cfg)
    # T[0] only appears as T[t-1] of the first residual
    assert g[0] == pytest.approx(2 * r[0] / len(r) * -cfg.alpha_diff, rel=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_finite_difference(seed):
    assert physics_grad_error(seed) < 1e-6


def test_config_validation():
    with pytest.raises(ValueError):
        PhysicsConfig(dt_s=0.0)
    with pytest.raises(ValueError):
        PhysicsConfig(alpha_diff=-1.0)


@settings(max_examples=100, deadline=None)
@given(seqs, st.floats(-50, 50))
def test_shift_invariance(T, c):
    assert physics_loss(T + c, CFG) == pytest.approx(physics_loss(T, CFG), rel=1e-6, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(seqs, st.floats(-5, 5))
def test_quadratic_scaling(T, s):
    assert physics_loss(s * T, CFG) == pytest.approx(s * s * physics_loss(T, CFG), rel=1e-9, abs=1e-9)


def test_total_loss_cases():
    y = np.array([0.1, 0.2, 0.3])
    bare = total_loss(y, y + 0.1, [y], PhysicsConfig(lambda_weight=0.0))
    assert bare.total == bare.data_loss == pytest.approx(0.01)
    assert bare.phys_loss > 0
    const = np.full(5, 0.4)
    assert total_loss(const, const, [const], CFG).total == 0.0
    with pytest.raises(LengthMismatch):
        total_loss(y, y[:2], [], CFG)


def test_total_loss_arithmetic():
    # data 0.2 (one sample off by sqrt 0.2) and phys 0.4 from a single residual
    cfg = PhysicsConfig(alpha_diff=0.0, dt_s=1.0, lambda_weight=0.5)
    seq = np.array([0.0, 0.0, np.sqrt(0.4)])
    lb = total_loss([np.sqrt(0.2)], [0.0], [seq], cfg)
    assert lb.data_loss == pytest.approx(0.2) and lb.phys_loss == pytest.approx(0.4)
    assert lb.total == pytest.approx(0.4, abs=1e-12)
    assert lb.n_residuals == 1


@settings(max_examples=50, deadline=None)
@given(seqs, st.floats(0, 2), st.floats(0, 2))
def test_total_monotone_in_lambda(T, l1, l2):
    lo, hi = sorted((l1, l2))
    targ = np.zeros_like(T)
    a = total_loss(T, targ, [T], PhysicsConfig(lambda_weight=lo))
    b = total_loss(T, targ, [T], PhysicsConfig(lambda_weight=hi))
    assert b.total >= a.total
    assert a.total == pytest.approx(a.data_loss + lo * a.phys_loss, abs=1e-12 * max(1.0, a.total))


def test_total_loss_grad_matches_fd():
    rng = np.random.default_rng(0)
    pred, targ = rng.normal(size=9), rng.normal(size=9)
    segs = [slice(0, 4), slice(4, 9)]
    cfg = PhysicsConfig(alpha_diff=0.2, dt_s=0.5, lambda_weight=0.3)
    lb, g = total_loss_grad(pred, targ, segs, cfg)
    ref = total_loss(pred, targ, [pred[s] for s in segs], cfg)
    assert lb.total == pytest.approx(ref.total, rel=1e-14)
    eps = 1e-6
    for k in range(9):
        e = np.zeros(9)
        e[k] = eps
        fd = (total_loss_grad(pred + e, targ, segs, cfg)[0].total - total_loss_grad(pred - e, targ, segs, cfg)[0].total) / (2 * eps)
        assert g[k] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_zero_lambda_gradient_is_data_gradient():
    rng = np.random.default_rng(1)
    pred, targ = rng.normal(size=6), rng.normal(size=6)
    lb, g = total_loss_grad(pred, targ, [slice(0, 6)], PhysicsConfig(lambda_weight=0.0))
    np.testing.assert_array_equal(g, 2.0 * (pred - targ) / 6)
    assert lb.phys_loss > 0 and lb.total == lb.data_loss
