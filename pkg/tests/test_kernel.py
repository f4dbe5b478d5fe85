import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from insertion_gnn import kernel
from insertion_gnn.errors import DomainError, NumericError, ShapeError
from insertion_gnn.rng import Rng


def matmul_oracle(a, b):
    """Independent triple-loop product."""
    n, k = a.shape
    k2, m = b.shape
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


class TestMatmul:
    def test_identity(self):
        m = Rng(1).normals(2, 5)
        assert np.array_equal(kernel.matmul(np.eye(2), m), m)

    def test_analytic(self):
        out = kernel.matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[0.0], [1.0]]))
        assert np.array_equal(out, np.array([[2.0], [4.0]]))

    def test_against_triple_loop_oracle(self):
        rng = Rng(2)
        a, b = rng.normals(5, 7), rng.normals(7, 3)
        got, want = kernel.matmul(a, b), matmul_oracle(a, b)
        assert np.max(np.abs(got - want)) <= 1e-12 * max(1.0, np.abs(want).max())

    def test_oracle_up_to_32(self):
        rng = Rng(3)
        for n, k, m in [(32, 32, 32), (1, 32, 1), (13, 1, 9)]:
            a, b = rng.normals(n, k), rng.normals(k, m)
            want = matmul_oracle(a, b)
            rel = np.abs(kernel.matmul(a, b) - want) / np.maximum(np.abs(want), 1.0)
            assert rel.max() <= 1e-12

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            kernel.matmul(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_nonfinite_rejected(self):
        with pytest.raises(NumericError):
            kernel.matmul(np.array([[np.inf]]), np.array([[1.0]]))


class TestActivation:
    def test_leaky_slope_point(self):
        out = kernel.activation(np.array([[-1.0]]), "leaky_relu", slope=0.2)
        assert out[0, 0] == -0.2

    def test_fixed_points(self):
        assert kernel.activation(np.array([[0.0]]), "relu")[0, 0] == 0.0
        assert kernel.activation(np.array([[0.0]]), "tanh")[0, 0] == 0.0
        assert kernel.activation(np.array([[0.0]]), "sigmoid")[0, 0] == 0.5

    def test_leaky_grid_matches_pointwise_oracle(self):
        x = Rng(4).normals(10, 10) * 3.0
        got = kernel.activation(x, "leaky_relu", slope=0.2)
        for i in range(10):
            for j in range(10):
                v = x[i, j]
                assert got[i, j] == (v if v >= 0 else 0.2 * v)

    def test_bad_slope(self):
        with pytest.raises(DomainError):
            kernel.activation(np.ones((1, 1)), "leaky_relu", slope=1.5)

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            kernel.activation(np.ones((1, 1)), "gelu")


class TestSoftmax:
    def test_singleton(self):
        for c in (-100.0, 0.0, 3.7, 1e6):
            assert kernel.softmax_over_set([c]) == [1.0]

    def test_symmetry(self):
        assert kernel.softmax_over_set([0.0, 0.0]) == [0.5, 0.5]

    def test_analytic(self):
        out = kernel.softmax_over_set([math.log(1.0), math.log(3.0)])
        assert abs(out[0] - 0.25) < 1e-12 and abs(out[1] - 0.75) < 1e-12

    def test_empty_raises(self):
        with pytest.raises(DomainError):
            kernel.softmax_over_set([])

    @given(st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=20))
    def test_sums_to_one_and_positive(self, scores):
        out = kernel.softmax_over_set(scores)
        assert abs(sum(out) - 1.0) <= 1e-9
        assert all(p > 0.0 for p in out)

    @given(st.lists(st.floats(min_value=-20, max_value=20), min_size=2, max_size=10),
           st.floats(min_value=-30, max_value=30))
    def test_shift_invariance(self, scores, c):
        a = kernel.softmax_over_set(scores)
        b = kernel.softmax_over_set([s + c for s in scores])
        assert np.allclose(a, b, atol=1e-12)

    def test_order_preserving(self):
        out = kernel.softmax_over_set([1.0, 3.0, 2.0])
        assert out[1] > out[2] > out[0]


class TestDropout:
    def test_rate_zero_identity(self):
        x = Rng(5).normals(8, 8)
        assert np.array_equal(kernel.dropout(x, 0.0, Rng(1), training=True), x)

    def test_inference_identity(self):
        x = Rng(5).normals(8, 8)
        assert np.array_equal(kernel.dropout(x, 0.9, Rng(1), training=False), x)

    def test_expectation_preserved(self):
        x = np.ones((100, 100))
        out = kernel.dropout(x, 0.5, Rng(6), training=True)
        assert abs(out.mean() - 1.0) < 0.05

    def test_expectation_within_5_sigma(self):
        # survivors are 2.0 w.p. 0.5: var = 1 per entry, sem = 1/sqrt(n)
        n = 10_000
        out = kernel.dropout(np.ones((100, 100)), 0.5, Rng(7), training=True)
        assert abs(out.mean() - 1.0) <= 5.0 / math.sqrt(n)

    def test_bad_rate(self):
        with pytest.raises(DomainError):
            kernel.dropout(np.ones((2, 2)), 1.0, Rng(1), training=True)


class TestBce:
    def test_perfect_prediction(self):
        assert kernel.bce_loss([1.0, 0.0, 0.0, 0.0], [1, 0, 0, 0]) <= 1e-6

    def test_uniform_is_ln2(self):
        for y in ([1, 0, 0, 0], [0, 0, 1, 0], [1, 1, 1, 1]):
            assert abs(kernel.bce_loss([0.5] * 4, y) - math.log(2.0)) < 1e-12

    def test_against_scalar_oracle(self):
        rng = Rng(8)
        p = rng.uniforms(1, 32)[0]
        y = (rng.uniforms(1, 32)[0] > 0.5).astype(int)
        got = kernel.bce_loss(p, y)
        total = 0.0
        for pi, yi in zip(p, y):
            pc = min(max(pi, 1e-7), 1 - 1e-7)
            total += -(yi * math.log(pc) + (1 - yi) * math.log(1 - pc))
        assert abs(got - total / 32) <= 1e-12

    def test_non_negative_and_zero_only_at_match(self):
        assert kernel.bce_loss([0.3], [0]) > 0.0
        assert kernel.bce_loss([0.999], [1]) > 0.0
        rng = Rng(9)
        for _ in range(20):
            p = rng.uniforms(1, 4)[0]
            y = (rng.uniforms(1, 4)[0] > 0.5).astype(int)
            assert kernel.bce_loss(p, y) >= 0.0

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            kernel.bce_loss([0.5, 0.5], [1])


class TestOneHot:
    def test_shape_and_position(self):
        v = kernel.one_hot(2)
        assert v.shape == (4, 1) and v[2, 0] == 1.0 and v.sum() == 1.0

    def test_range(self):
        with pytest.raises(DomainError):
            kernel.one_hot(4)
