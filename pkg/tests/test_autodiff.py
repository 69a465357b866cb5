"""Finite-difference checks for every autodiff primitive."""

import numpy as np
import pytest

from aerosurrogate import autodiff as ad
from aerosurrogate.autodiff import Tensor


def fd_check(fn, *arrays, h=1e-6, tol=1e-6):
    """Compare analytic gradients of scalar fn(*tensors) against central
    finite differences for every input array."""
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = fn(*tensors)
    out.backward()
    for t, a in zip(tensors, arrays):
        analytic = t.grad if t.grad is not None else np.zeros_like(a)
        flat = t.value.reshape(-1)
        fd = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(fn(*tensors).value)
            flat[i] = orig - h
            down = float(fn(*tensors).value)
            flat[i] = orig
            fd[i] = (up - down) / (2 * h)
        fd = fd.reshape(t.value.shape)
        scale = max(np.abs(analytic).max(initial=0), np.abs(fd).max(initial=0), 1.0)
        assert np.abs(analytic - fd).max() / scale < tol


def rand(*shape, seed=0):
    return np.random.default_rng(seed).normal(size=shape)


class TestPrimitives:
    def test_add_broadcast(self):
        fd_check(lambda a, b: ad.sum_(ad.add(a, b)), rand(3, 4), rand(4))

    def test_sub(self):
        fd_check(lambda a, b: ad.sum_(ad.square(ad.sub(a, b))),
                 rand(3, 2), rand(3, 2, seed=1))

    def test_mul_broadcast(self):
        fd_check(lambda a, b: ad.sum_(ad.mul(a, b)), rand(2, 3), rand(2, 1, seed=1))

    def test_div(self):
        fd_check(lambda a, b: ad.sum_(ad.div(a, b)),
                 rand(2, 3), rand(2, 3, seed=1) + 3.0)

    def test_matmul(self):
        fd_check(lambda a, b: ad.sum_(ad.matmul(a, b)),
                 rand(3, 4), rand(4, 2, seed=1))

    def test_sum_axis(self):
        fd_check(lambda a: ad.sum_(ad.square(ad.sum_(a, axis=0))), rand(3, 4))

    def test_mean(self):
        fd_check(lambda a: ad.sum_(ad.square(ad.mean(a, axis=1, keepdims=True))),
                 rand(3, 4))

    def test_exp(self):
        fd_check(lambda a: ad.sum_(ad.exp(a)), rand(3, 3))

    def test_tanh(self):
        fd_check(lambda a: ad.sum_(ad.tanh(a)), rand(3, 3))

    def test_sqrt(self):
        fd_check(lambda a: ad.sum_(ad.sqrt(a)), np.abs(rand(3, 3)) + 0.5)

    def test_maximum_const(self):
        fd_check(lambda a: ad.sum_(ad.maximum_const(a, 0.3)),
                 rand(4, 4) + 2.0)   # keep away from the kink

    def test_getitem(self):
        fd_check(lambda a: ad.sum_(ad.square(ad.getitem(a, slice(1, 3)))),
                 rand(5, 2))

    def test_concat(self):
        fd_check(lambda a, b: ad.sum_(ad.square(ad.concat([a, b], axis=1))),
                 rand(2, 3), rand(2, 2, seed=1))

    def test_reshape_transpose(self):
        fd_check(lambda a: ad.sum_(ad.square(ad.transpose(ad.reshape(a, (2, 6))))),
                 rand(3, 4))


class TestComposites:
    def test_softmax_rows_sum_to_one(self):
        s = ad.softmax(Tensor(rand(5, 7) * 10), axis=-1)
        np.testing.assert_allclose(s.value.sum(axis=-1), 1.0, atol=1e-12)

    def test_softmax_gradient(self):
        w = rand(3, 4, seed=2)
        fd_check(lambda a: ad.sum_(ad.mul(ad.softmax(a, axis=-1), w)), rand(3, 4))

    def test_softmax_stability(self):
        s = ad.softmax(Tensor(np.array([[1000.0, 1000.0, 999.0]])), axis=-1)
        assert np.all(np.isfinite(s.value))

    def test_gelu_values(self):
        # GELU(0)=0 and the tanh approximation is close to x for large x
        g = ad.gelu(Tensor(np.array([0.0, 5.0, -5.0])))
        assert g.value[0] == 0.0
        assert abs(g.value[1] - 5.0) < 1e-4
        assert abs(g.value[2]) < 1e-4

    def test_gelu_gradient(self):
        fd_check(lambda a: ad.sum_(ad.gelu(a)), rand(4, 3))

    def test_layer_norm_gradient(self):
        g = rand(4, seed=3) + 2.0
        b = rand(4, seed=4)
        fd_check(lambda a, gg, bb: ad.sum_(ad.square(ad.layer_norm(a, gg, bb))),
                 rand(3, 4), g, b)

    def test_layer_norm_statistics(self):
        out = ad.layer_norm(Tensor(rand(6, 8)), Tensor(np.ones(8)),
                            Tensor(np.zeros(8)))
        np.testing.assert_allclose(out.value.mean(axis=-1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.value.std(axis=-1), 1.0, atol=1e-3)

    def test_frobenius_norm(self):
        a = rand(3, 3)
        assert float(ad.frobenius_norm(Tensor(a)).value) == \
            pytest.approx(np.linalg.norm(a))


class TestEngine:
    def test_backward_requires_scalar(self):
        t = Tensor(rand(2, 2), requires_grad=True)
        with pytest.raises(ValueError):
            ad.add(t, t).backward()

    def test_grad_accumulates_through_shared_node(self):
        x = Tensor(np.array(2.0), requires_grad=True)
        y = ad.add(ad.mul(x, x), x)   # x^2 + x -> grad 2x+1 = 5
        y.backward()
        assert float(x.grad) == pytest.approx(5.0)

    def test_no_grad_for_constants(self):
        c = Tensor(np.array(1.0))
        x = Tensor(np.array(1.0), requires_grad=True)
        out = ad.mul(c, x)
        out.backward()
        assert c.grad is None
