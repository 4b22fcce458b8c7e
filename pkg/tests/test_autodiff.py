"""Tensor ops and reverse-mode gradients against finite differences."""

import numpy as np
import pytest

from courier_har import autodiff as ad
from courier_har.autodiff import Tensor, no_grad
from courier_har.errors import ContractError, ShapeError


def t(arr, grad=True):
    return Tensor(np.asarray(arr, dtype=np.float64), requires_grad=grad)


def test_matmul_identity():
    a = np.arange(9.0).reshape(3, 3)
    out = ad.matmul(t(np.eye(3)), t(a))
    np.testing.assert_array_equal(out.data, a)


def test_matmul_matches_triple_loop_reference():
    rng = np.random.Generator(np.random.PCG64(5))
    a = rng.normal(size=(2, 3))
    b = rng.normal(size=(3, 2))
    ref = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            for k in range(3):
                ref[i, j] += a[i, k] * b[k, j]
    out = ad.matmul(t(a), t(b))
    np.testing.assert_allclose(out.data, ref, rtol=1e-12)


def test_matmul_shape_mismatch_reports_both_shapes():
    with pytest.raises(ShapeError) as exc:
        ad.matmul(t(np.zeros((2, 3))), t(np.zeros((4, 2))))
    assert "(2, 3)" in str(exc.value) and "(4, 2)" in str(exc.value)


def test_softmax_rows_sum_to_one():
    rng = np.random.Generator(np.random.PCG64(1))
    x = rng.normal(scale=5.0, size=(7, 11))
    out = ad.softmax(t(x))
    np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, atol=1e-6)


def test_backward_requires_scalar_loss():
    x = t(np.ones((2, 2)))
    with pytest.raises(ContractError):
        ad.matmul(x, x).backward()


def test_constant_loss_gives_zero_gradients():
    w = t(np.ones(3))
    loss = ad.reduce_sum(t(np.full(3, 2.0)) * t(np.ones(3), grad=False))
    loss.backward()
    # w never participates: its gradient stays zero.
    assert w.grad is None or not np.any(w.grad)


def test_linear_gradient_is_exact():
    x = np.array([1.5, -2.0, 0.25])
    w = t(np.array([0.1, 0.2, 0.3]))
    loss = ad.reduce_sum(w * Tensor(x))
    loss.backward()
    np.testing.assert_array_equal(w.grad, x)


def _fd_check(fn, *tensors, h=1e-5, rtol=2e-4):
    """Central finite differences against analytic grads, 64-bit."""
    loss = fn(*tensors)
    loss.backward()
    for ten in tensors:
        if not ten.requires_grad:
            continue
        grad = ten.grad.copy()
        flat = ten.data.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = np.asarray(fn(*tensors).data).item()
            flat[idx] = orig - h
            down = np.asarray(fn(*tensors).data).item()
            flat[idx] = orig
            fd = (up - down) / (2 * h)
            an = grad.reshape(-1)[idx]
            assert an == pytest.approx(fd, rel=rtol, abs=1e-7), \
                f"param {idx}: analytic {an} vs fd {fd}"


RNG = np.random.Generator(np.random.PCG64(42))

OP_CASES = {
    "add": lambda a, b: ad.reduce_sum(ad.tanh(a + b)),
    "sub": lambda a, b: ad.reduce_sum(ad.sigmoid(a - b)),
    "mul": lambda a, b: ad.reduce_sum(ad.tanh(a * b)),
    "matmul": lambda a, b: ad.reduce_sum(
        ad.tanh(ad.matmul(a, ad.transpose(b)))),
    "gelu": lambda a, b: ad.reduce_sum(ad.gelu(a * b)),
    "softmax": lambda a, b: ad.reduce_sum(ad.softmax(a) * b),
    "log_softmax": lambda a, b: ad.reduce_sum(ad.log_softmax(a) * b),
    "layer_norm": lambda a, b: ad.reduce_sum(ad.layer_norm(a * b)),
    "reduce_mean": lambda a, b: ad.reduce_mean(a * b) * Tensor(3.0),
    "concat": lambda a, b: ad.reduce_sum(
        ad.tanh(ad.concat([a, b], axis=0))),
    "slice": lambda a, b: ad.reduce_sum(
        ad.tslice(a * b, (slice(None), slice(1, 3)))),
}


@pytest.mark.parametrize("name", sorted(OP_CASES))
def test_op_gradients_match_finite_differences(name):
    shape = (4,) if name == "layer_norm" else (3, 4)
    a = t(RNG.normal(size=(3, 4)) if name != "layer_norm"
          else RNG.normal(size=(2, 4)))
    b = t(RNG.normal(size=shape) * 0.5 + 1.0)
    _fd_check(OP_CASES[name], a, b)


def test_gather_rows_gradient():
    a = t(RNG.normal(size=(4, 3)))
    idx = np.array([0, 2, 2, 1])

    def fn(x):
        return ad.reduce_sum(ad.tanh(ad.gather_rows(x, idx)))

    _fd_check(fn, a)


def test_cross_entropy_gradient():
    logits = t(RNG.normal(size=(4, 3)))
    labels = np.array([0, 2, 1, 1])

    def fn(x):
        return ad.cross_entropy(x, labels)

    _fd_check(fn, logits)


def test_determinism_bitwise():
    def run():
        rng = np.random.Generator(np.random.PCG64(9))
        a = t(rng.normal(size=(6, 6)))
        loss = ad.reduce_mean(ad.gelu(ad.matmul(a, a)))
        loss.backward()
        return loss.data.copy(), a.grad.copy()

    l1, g1 = run()
    l2, g2 = run()
    np.testing.assert_array_equal(l1, l2)
    np.testing.assert_array_equal(g1, g2)


def test_no_grad_suppresses_tape():
    a = t(np.ones((2, 2)))
    with no_grad():
        out = ad.matmul(a, a)
    assert out._parents == () and not out.requires_grad


def test_unbroadcast_bias_gradient():
    w = t(RNG.normal(size=(3, 4)))
    b = t(RNG.normal(size=(4,)))

    def fn(wt, bt):
        return ad.reduce_sum(ad.tanh(wt + bt))

    _fd_check(fn, w, b)


def test_assert_finite_raises_on_nan():
    from courier_har.errors import NumericError
    bad = Tensor(np.array([1.0, np.nan]))
    with pytest.raises(NumericError):
        ad.assert_finite(bad, "unit-test tensor")
