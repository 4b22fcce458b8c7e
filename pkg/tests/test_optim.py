"""Adam optimizer contract tests."""

import numpy as np
import pytest

from courier_har.autodiff import Tensor
from courier_har.errors import ShapeError
from courier_har.optim import Adam


def make_param(values):
    return Tensor(np.asarray(values, dtype=np.float32), requires_grad=True)


def test_zero_gradients_leave_params_unchanged():
    p = make_param([1.0, -2.0, 3.0])
    opt = Adam({"p": p})
    before = p.data.copy()
    p.grad = np.zeros_like(p.data)
    for _ in range(5):
        opt.step()
    np.testing.assert_array_equal(p.data, before)


def test_single_step_matches_hand_computation():
    # One bias-corrected step with g=1: m_hat = v_hat = 1, so the update is
    # lr / (sqrt(1) + eps) ~= lr.
    p = make_param([0.5])
    opt = Adam({"p": p}, lr=0.001)
    p.grad = np.ones(1, dtype=np.float32)
    opt.step()
    expected = 0.5 - 0.001 * 1.0 / (1.0 + 1e-8)
    assert p.data[0] == pytest.approx(expected, abs=1e-6)


def test_lr_zero_never_moves_params():
    rng = np.random.Generator(np.random.PCG64(0))
    p = make_param(rng.normal(size=7))
    before = p.data.copy()
    opt = Adam({"p": p}, lr=0.0)
    for _ in range(10):
        p.grad = rng.normal(size=7).astype(np.float32)
        opt.step()
    np.testing.assert_array_equal(p.data, before)


def test_shape_mismatch_raises():
    p = make_param([1.0, 2.0])
    opt = Adam({"p": p})
    with pytest.raises(ShapeError):
        opt.step(grads={"p": np.zeros(3, dtype=np.float32)})


def test_step_count_increments_by_one():
    p = make_param([1.0])
    opt = Adam({"p": p})
    assert opt.step_count == 0
    for i in range(4):
        p.grad = np.ones(1, dtype=np.float32)
        opt.step()
        assert opt.step_count == i + 1


def test_moment_shapes_match_params():
    p = make_param(np.zeros((3, 2)))
    opt = Adam({"p": p})
    p.grad = np.ones((3, 2), dtype=np.float32)
    opt.step()
    assert opt.m["p"].shape == (3, 2)
    assert opt.v["p"].shape == (3, 2)


def test_descends_a_quadratic():
    p = make_param([5.0])
    opt = Adam({"p": p}, lr=0.05)
    for _ in range(500):
        p.grad = 2.0 * p.data  # d/dp of p^2
        opt.step()
    assert abs(p.data[0]) < 0.1
