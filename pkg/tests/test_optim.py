"""Adadelta: the hand-worked first step, reference-loop equivalence, state rules."""

import math

import numpy as np
import pytest

from paradet.autodiff import Tensor
from paradet.errors import ShapeError
from paradet.optim import AdadeltaState, adadelta_step


def param_with_grad(values, grad):
    p = Tensor(values, requires_grad=True)
    p.grad = np.asarray(grad, dtype=np.float64)
    return p


def test_first_step_worked_example():
    p = param_with_grad([0.0], [1.0])
    state = AdadeltaState(shape=(1,))
    adadelta_step(p, state)
    # E[g^2] = (1-0.95)*1^2; delta = -sqrt(0 + 1e-6)/sqrt(E[g^2] + 1e-6)
    eg = (1.0 - 0.95) * 1.0
    expected_delta = -math.sqrt(1e-6) / math.sqrt(eg + 1e-6)
    assert abs(expected_delta + 0.0044721) < 1e-7
    np.testing.assert_allclose(p.values, [expected_delta], rtol=0, atol=1e-18)
    np.testing.assert_allclose(state.accum_grad_sq, [0.05], rtol=0, atol=1e-15)
    np.testing.assert_allclose(
        state.accum_update_sq, [eg * expected_delta**2], rtol=0, atol=1e-18
    )


def test_zero_gradient_is_bit_identical_no_op():
    vals = np.array([1.5, -2.25, 0.0])
    p = param_with_grad(vals.copy(), np.zeros(3))
    state = AdadeltaState(shape=(3,))
    state.accum_grad_sq[:] = [0.3, 0.0, 7.0]
    state.accum_update_sq[:] = [0.1, 0.2, 0.0]
    before_g = state.accum_grad_sq.copy()
    before_u = state.accum_update_sq.copy()
    adadelta_step(p, state)
    assert np.array_equal(p.values, vals)
    # accumulators still decay toward zero even with zero gradient
    np.testing.assert_allclose(state.accum_grad_sq, 0.95 * before_g, rtol=0, atol=0)
    np.testing.assert_allclose(state.accum_update_sq, 0.95 * before_u, rtol=0, atol=0)


def test_update_opposes_gradient_sign():
    rng = np.random.default_rng(3)
    grad = rng.normal(size=(4, 5))
    grad[np.abs(grad) < 0.1] = 0.5
    p = param_with_grad(np.zeros((4, 5)), grad)
    adadelta_step(p, AdadeltaState(shape=(4, 5)))
    assert np.all(np.sign(p.values) == -np.sign(grad))


def test_matches_reference_loop_over_many_steps():
    rng = np.random.default_rng(5)
    values = rng.normal(size=7)
    p = Tensor(values.copy(), requires_grad=True)
    state = AdadeltaState(shape=(7,), rho=0.9, eps=1e-5)

    ref = values.copy()
    eg = np.zeros(7)
    eu = np.zeros(7)
    rho = 0.9
    for _ in range(25):
        g = rng.normal(size=7)
        p.grad = g.copy()
        adadelta_step(p, state, lr=0.7)
        eg = eg * rho + (1.0 - rho) * g * g
        d = -(np.sqrt(eu + 1e-5) / np.sqrt(eg + 1e-5)) * g
        eu = eu * rho + (1.0 - rho) * d * d
        ref += 0.7 * d
    np.testing.assert_allclose(p.values, ref, rtol=0, atol=1e-15)
    np.testing.assert_allclose(state.accum_grad_sq, eg, rtol=0, atol=1e-15)
    np.testing.assert_allclose(state.accum_update_sq, eu, rtol=0, atol=1e-15)


def test_gradient_slot_left_intact():
    p = param_with_grad([1.0], [2.0])
    adadelta_step(p, AdadeltaState(shape=(1,)))
    np.testing.assert_array_equal(p.grad, [2.0])


def test_lr_scales_applied_update_only():
    g = np.array([1.0, -2.0])
    p_full = param_with_grad([0.0, 0.0], g.copy())
    p_half = param_with_grad([0.0, 0.0], g.copy())
    s_full = AdadeltaState(shape=(2,))
    s_half = AdadeltaState(shape=(2,))
    adadelta_step(p_full, s_full, lr=1.0)
    adadelta_step(p_half, s_half, lr=0.5)
    np.testing.assert_allclose(p_half.values, 0.5 * p_full.values, rtol=0, atol=0)
    # accumulators are lr-independent
    assert np.array_equal(s_full.accum_grad_sq, s_half.accum_grad_sq)
    assert np.array_equal(s_full.accum_update_sq, s_half.accum_update_sq)


def test_validation():
    with pytest.raises(ValueError):
        AdadeltaState(shape=(1,), rho=1.0)
    with pytest.raises(ValueError):
        AdadeltaState(shape=(1,), rho=-0.1)
    with pytest.raises(ValueError):
        AdadeltaState(shape=(1,), eps=0.0)
    p = Tensor([1.0], requires_grad=True)
    with pytest.raises(ValueError):
        adadelta_step(p, AdadeltaState(shape=(1,)))
    p.grad = np.zeros(2)
    with pytest.raises(ShapeError):
        adadelta_step(p, AdadeltaState(shape=(1,)))
    p.grad = np.zeros(1)
    with pytest.raises(ShapeError):
        adadelta_step(p, AdadeltaState(shape=(3,)))
