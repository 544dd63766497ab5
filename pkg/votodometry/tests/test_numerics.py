# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###
import unittest

import numpy as np
import pytest

from votodometry import numerics as nx
from votodometry.exceptions import NotScalarError, ShapeError


def weighted_sum(tensor, weights):
    """A scalar with a non-trivial gradient for every entry."""
    return nx.total(nx.mul(tensor, nx.constant(weights)))


def check(fn, tensors):
    return nx.gradient_check(fn, tensors)


class SoftmaxTestCase(unittest.TestCase):

    @property
    def target(self):
        from ..numerics import softmax_lastdim
        return softmax_lastdim

    def test_equal_row(self):
        out = self.target(nx.constant(np.full((1, 5), 3.0)))
        np.testing.assert_allclose(out.data, np.full((1, 5), 0.2))

    def test_rows_sum_to_one(self):
        x = np.random.default_rng(0).normal(size=(4, 7)) * 10
        out = self.target(nx.constant(x))
        np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, atol=1e-7)

    def test_shift_invariant(self):
        x = np.random.default_rng(1).normal(size=(3, 6))
        a = self.target(nx.constant(x)).data
        b = self.target(nx.constant(x + 123.0)).data
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_large_inputs_do_not_overflow(self):
        out = self.target(nx.constant([[1000.0, 1000.0]]))
        np.testing.assert_allclose(out.data, [[0.5, 0.5]])


class MatmulTestCase(unittest.TestCase):

    @property
    def target(self):
        from ..numerics import matmul
        return matmul

    def test_matches_naive_product(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=(4, 3)), rng.normal(size=(3, 5))
        expected = np.zeros((4, 5))
        for i in range(4):
            for j in range(5):
                for k in range(3):
                    expected[i, j] += a[i, k] * b[k, j]
        out = self.target(nx.constant(a), nx.constant(b))
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    def test_shape_mismatch_names_both_shapes(self):
        with self.assertRaises(ShapeError) as caught:
            self.target(nx.constant(np.ones((2, 3))),
                        nx.constant(np.ones((2, 3))))
        self.assertEqual(caught.exception.as_dict()['left'], (2, 3))
        self.assertEqual(caught.exception.as_dict()['right'], (2, 3))


class BackwardTestCase(unittest.TestCase):

    def test_sum_gives_ones(self):
        x = nx.parameter(np.arange(6.0).reshape(2, 3))
        with nx.Tape() as tape:
            loss = nx.total(x)
        tape.backward(loss)
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_half_square_gives_x(self):
        data = np.random.default_rng(3).normal(size=(3, 2))
        x = nx.parameter(data)
        with nx.Tape():
            loss = nx.scale(nx.total(nx.mul(x, x)), 0.5)
        nx.backward(loss)
        np.testing.assert_allclose(x.grad, data)

    def test_non_scalar(self):
        x = nx.parameter(np.ones(3))
        with nx.Tape() as tape:
            y = nx.scale(x, 2.0)
        with self.assertRaises(NotScalarError):
            tape.backward(y)

    def test_reused_tensor_accumulates(self):
        x = nx.parameter([2.0])
        with nx.Tape() as tape:
            y = nx.mul(x, x)
            loss = nx.total(y + y)
        tape.backward(loss)
        np.testing.assert_allclose(x.grad, [8.0])

    def test_tape_is_topologically_ordered(self):
        x = nx.parameter(np.ones((2, 2)))
        with nx.Tape() as tape:
            nx.total(nx.gelu(nx.matmul(x, x)) + x)
        seen = set()
        for node in tape.nodes:
            for tensor in node.inputs:
                if tensor.node is not None:
                    self.assertIn(tensor.node.index, seen)
            seen.add(node.index)

    def test_no_tape_records_nothing(self):
        x = nx.parameter(np.ones(3))
        with nx.Tape() as tape:
            with nx.no_tape():
                nx.total(nx.scale(x, 3.0))
        self.assertEqual(len(tape), 0)


class LayerNormTestCase(unittest.TestCase):

    def test_normalized_rows(self):
        x = np.random.default_rng(4).normal(3.0, 5.0, size=(6, 16))
        out = nx.layer_norm(nx.constant(x), nx.constant(np.ones(16)),
                            nx.constant(np.zeros(16))).data
        self.assertLess(np.abs(out.mean(axis=-1)).max(), 1e-7)
        np.testing.assert_allclose(out.var(axis=-1), 1.0, atol=1e-6)

    def test_gain_shape_checked(self):
        with self.assertRaises(ShapeError):
            nx.layer_norm(nx.constant(np.ones((2, 4))),
                          nx.constant(np.ones(3)), nx.constant(np.zeros(3)))


def test_attention_saturates_to_values():
    keys = np.eye(3)
    values = np.random.default_rng(5).normal(size=(3, 4))
    out = nx.scaled_dot_attention(nx.constant(100.0 * keys),
                                  nx.constant(keys), nx.constant(values))
    np.testing.assert_allclose(out.data, values, atol=1e-12)


def test_attention_rejects_mismatched_width():
    with pytest.raises(ShapeError):
        nx.scaled_dot_attention(nx.constant(np.ones((2, 3))),
                                nx.constant(np.ones((2, 4))),
                                nx.constant(np.ones((2, 4))))


def test_add_rejects_general_broadcasting():
    with pytest.raises(ShapeError):
        nx.add(nx.constant(np.ones((2, 3))), nx.constant(np.ones((2, 1))))


# ###################### #
#   Finite differences   #
# ###################### #

def _unary_cases():
    return [
        ('softmax', nx.softmax_lastdim),
        ('gelu', nx.gelu),
        ('abs', nx.absolute),
        ('swapaxes', lambda t: nx.swapaxes(t, 0, 1)),
        ('index', lambda t: t[1:, ::2]),
        ('scale', lambda t: nx.scale(t, -1.7)),
        ('reshape', lambda t: nx.reshape(t, (-1,))),
    ]


@pytest.mark.parametrize('name, op', _unary_cases())
@pytest.mark.parametrize('shape', [(2, 3), (4, 1), (3, 6)])
def test_unary_gradients(name, op, shape):
    rng = np.random.default_rng(10 * len(name) + sum(shape))
    x = nx.parameter(rng.normal(size=shape) + 0.1)
    weights = rng.normal(size=op(nx.constant(x.data)).shape)
    assert check(lambda: weighted_sum(op(x), weights), [x]) < 1e-4


@pytest.mark.parametrize('dims', [(1, 1, 1), (2, 3, 4), (6, 5, 2)])
def test_binary_gradients(dims):
    m, k, n = dims
    rng = np.random.default_rng(sum(dims))
    a = nx.parameter(rng.normal(size=(m, k)))
    b = nx.parameter(rng.normal(size=(k, n)))
    c = nx.parameter(rng.normal(size=(m, k)))
    bias = nx.parameter(rng.normal(size=n))
    w = rng.normal(size=(m, n))

    def fn():
        product = nx.matmul(nx.mul(a, c) - a + c, b)
        return weighted_sum(nx.add(product, bias), w)

    assert check(fn, [a, b, c, bias]) < 1e-4


def test_linear_layer_norm_and_concat_gradients():
    rng = np.random.default_rng(6)
    x = nx.parameter(rng.normal(size=(2, 3, 4)))
    weight = nx.parameter(rng.normal(size=(4, 5)))
    bias = nx.parameter(rng.normal(size=5))
    gain = nx.parameter(rng.normal(size=5))
    shift = nx.parameter(rng.normal(size=5))
    row = nx.parameter(rng.normal(size=5))
    w = rng.normal(size=(2, 4, 5))

    def fn():
        h = nx.layer_norm(nx.linear(x, weight, bias), gain, shift)
        first = nx.broadcast_to(row, (2, 1, 5))
        return weighted_sum(nx.concat([first, h], axis=-2), w)

    assert check(fn, [x, weight, bias, gain, shift, row]) < 1e-4


def test_multi_head_attention_gradients():
    rng = np.random.default_rng(7)
    d, heads = 4, 2
    x = nx.parameter(rng.normal(size=(2, 3, d)))
    qk = nx.parameter(rng.normal(size=(2, 3, d)))
    ws = [nx.parameter(rng.normal(size=(d, d)) / 2) for _ in range(4)]
    w = rng.normal(size=(2, 3, d))

    def fn():
        return weighted_sum(
            nx.multi_head_attention(x, *ws, heads=heads, qk_input=qk), w)

    assert check(fn, [x, qk] + ws) < 1e-4


def test_three_layer_mlp_gradients():
    rng = np.random.default_rng(8)
    x = nx.constant(rng.normal(size=(3, 2)))
    w1, b1 = nx.parameter(rng.normal(size=(2, 2))), nx.parameter(
        rng.normal(size=2))
    gain, shift = nx.parameter(rng.normal(size=2)), nx.parameter(
        rng.normal(size=2))
    w2, b2 = nx.parameter(rng.normal(size=(2, 2))), nx.parameter(
        rng.normal(size=2))
    w3, b3 = nx.parameter(rng.normal(size=(2, 1))), nx.parameter(
        rng.normal(size=1))
    params = [w1, b1, gain, shift, w2, b2, w3, b3]
    assert sum(p.size for p in params) == 19

    def fn():
        h = nx.gelu(nx.layer_norm(nx.linear(x, w1, b1), gain, shift))
        h = nx.gelu(nx.linear(h, w2, b2))
        return nx.mean(nx.linear(h, w3, b3))

    assert check(fn, params) < 1e-4


# ####### #
#   SVD   #
# ####### #

class Svd3TestCase(unittest.TestCase):

    @property
    def target(self):
        from ..numerics import svd3
        return svd3

    def test_identity(self):
        _, sigma, _ = self.target(np.eye(3))
        np.testing.assert_allclose(sigma, [1.0, 1.0, 1.0])

    def test_diagonal(self):
        u, sigma, v = self.target(np.diag([3.0, 2.0, 1.0]))
        np.testing.assert_allclose(sigma, [3.0, 2.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(np.abs(u), np.eye(3), atol=1e-12)
        np.testing.assert_allclose(np.abs(v), np.eye(3), atol=1e-12)

    def test_random_reconstruction(self):
        rng = np.random.default_rng(9)
        for _ in range(1000):
            m = rng.uniform(-2.0, 2.0, (3, 3))
            u, sigma, v = self.target(m)
            np.testing.assert_allclose(u @ np.diag(sigma) @ v.T, m,
                                       atol=1e-9)
            np.testing.assert_allclose(u.T @ u, np.eye(3), atol=1e-9)
            np.testing.assert_allclose(v.T @ v, np.eye(3), atol=1e-9)
            self.assertTrue(np.all(np.diff(sigma) <= 0))
            self.assertTrue(np.all(sigma >= 0))

    def test_rank_one(self):
        m = np.outer([1.0, 2.0, 3.0], [0.5, -1.0, 2.0])
        u, sigma, v = self.target(m)
        np.testing.assert_allclose(u @ np.diag(sigma) @ v.T, m, atol=1e-9)
        np.testing.assert_allclose(u.T @ u, np.eye(3), atol=1e-9)

    def assert_reconstructs(self, m):
        u, sigma, v = self.target(m)
        np.testing.assert_allclose(u @ np.diag(sigma) @ v.T, m, atol=1e-9)
        np.testing.assert_allclose(u.T @ u, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(v.T @ v, np.eye(3), atol=1e-9)
        return sigma

    def test_random_rank_one_reconstruction(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            m = np.outer(rng.normal(size=3), rng.normal(size=3))
            sigma = self.assert_reconstructs(m)
            self.assertLess(sigma[1], 1e-12 * sigma[0])

    def test_random_rank_two_reconstruction(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            m = rng.normal(size=(3, 2)) @ rng.normal(size=(2, 3))
            sigma = self.assert_reconstructs(m)
            self.assertLess(sigma[2], 1e-12 * sigma[0])
            self.assertGreater(sigma[1], 1e-12 * sigma[0])
