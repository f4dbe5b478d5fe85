import numpy as np
import pytest

from insertion_gnn.errors import DomainError, ShapeError
from insertion_gnn.optim import AdamState, adam_step, grad_check
from insertion_gnn.rng import Rng
from insertion_gnn.tensor import Tensor


class TestAdam:
    def test_zero_grad_zero_decay_is_identity(self):
        w = np.array([[1.0, -2.0], [0.5, 3.0]])
        st = AdamState.for_param(w, lr=0.1)
        out = w
        for t in range(1, 6):
            out = adam_step(out, np.zeros_like(w), st)
            assert st.t == t
            assert np.array_equal(out, w)

    def test_first_step_magnitude_is_lr(self):
        w = np.zeros((2, 2))
        g = np.array([[3.0, -0.2], [1e3, -1e-3]])
        st = AdamState.for_param(w, lr=0.01)
        out = adam_step(w, g, st)
        # bias-corrected first step ~ lr * sign(g)
        assert np.allclose(np.abs(out), 0.01, rtol=1e-4)
        assert np.array_equal(np.sign(out), -np.sign(g))

    def test_quadratic_descent_monotone(self):
        w = np.array([[3.0]])
        st = AdamState.for_param(w, lr=0.1)
        history = [abs(w[0, 0])]
        for _ in range(3):
            grad = 2.0 * w
            w = adam_step(w, grad, st)
            history.append(abs(w[0, 0]))
        assert all(b < a for a, b in zip(history, history[1:]))

    def test_weight_decay_joins_gradient(self):
        w = np.array([[2.0]])
        st = AdamState.for_param(w, lr=0.001, weight_decay=0.5)
        out = adam_step(w, np.zeros_like(w), st)
        assert out[0, 0] < 2.0  # decay pulls toward zero even with zero loss grad

    def test_shape_mismatch(self):
        st = AdamState.for_param(np.zeros((2, 2)))
        with pytest.raises(ShapeError):
            adam_step(np.zeros((2, 2)), np.zeros((2, 3)), st)


class TestGradCheck:
    def test_quadratic(self):
        w = Tensor(np.array([[3.0]]), requires_grad=True)

        def loss():
            return float(w.data[0, 0] ** 2)

        analytic = [np.array([[6.0]])]
        err = grad_check(loss, [w], analytic, probe_count=5, eps=1e-5, rng=Rng(1))
        assert err <= 1e-6

    def test_constant_function(self):
        w = Tensor(np.ones((3, 3)), requires_grad=True)
        err = grad_check(lambda: 42.0, [w], [np.zeros((3, 3))],
                         probe_count=9, eps=1e-4, rng=Rng(2))
        assert err <= 1e-4

    def test_detects_wrong_gradient(self):
        w = Tensor(np.array([[2.0]]), requires_grad=True)
        err = grad_check(lambda: float(w.data[0, 0] ** 2), [w],
                         [np.array([[1.0]])], probe_count=3, eps=1e-5, rng=Rng(3))
        assert err > 0.1

    def test_eps_domain(self):
        w = Tensor(np.ones((1, 1)), requires_grad=True)
        with pytest.raises(DomainError):
            grad_check(lambda: 0.0, [w], [np.zeros((1, 1))], 1, eps=1e-2, rng=Rng(4))
