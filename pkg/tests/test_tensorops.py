"""Unit tests for compressed quadratic feature maps"""
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from src.core.tensorops import (
    QuadIndexMap,
    compressed_square,
    expand_to_full,
    khatri_rao_square,
    khatri_rao_square_pullback,
    quad_dim,
)
from src.utils.errors import InputError


class TestCompressedSquare(unittest.TestCase):
    """Test the compressed Kronecker square of a vector"""

    def test_scalar(self):
        assert_array_equal(compressed_square(np.array([2.0])), [4.0])

    def test_unit_vector(self):
        assert_array_equal(compressed_square(np.array([1.0, 0.0, 0.0])), [1, 0, 0, 0, 0, 0])

    def test_matches_deduplicated_kronecker(self):
        """Entries follow the upper-triangular order of the full Kronecker product"""
        rng = np.random.default_rng(0)
        for r in (2, 3, 5):
            x = rng.standard_normal(r)
            full = np.kron(x, x).reshape(r, r)
            expected = [full[i, j] for i in range(r) for j in range(i, r)]
            assert_allclose(compressed_square(x), expected, rtol=1e-14)

    def test_rejects_matrix(self):
        with self.assertRaises(InputError):
            compressed_square(np.ones((2, 2)))

    def test_index_map(self):
        index = QuadIndexMap(3)
        self.assertEqual(len(index), 6)
        self.assertEqual(index.pairs, ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)))
        self.assertEqual(quad_dim(4), 10)


class TestKhatriRaoSquare(unittest.TestCase):
    """Test the columnwise feature matrix and its gradient pullback"""

    def test_zero_matrix(self):
        W = khatri_rao_square(np.zeros((3, 4)))
        self.assertEqual(W.shape, (6, 4))
        self.assertFalse(W.any())

    def test_single_column_of_ones(self):
        assert_array_equal(khatri_rao_square(np.ones((2, 1))), np.ones((3, 1)))

    def test_columnwise_agreement(self):
        X = np.random.default_rng(1).standard_normal((3, 5))
        W = khatri_rao_square(X)
        for k in range(5):
            assert_array_equal(W[:, k], compressed_square(X[:, k]))

    def test_pullback_is_adjoint_of_derivative(self):
        """<G, dW> equals <pullback(X, G), dX> for a directional perturbation"""
        rng = np.random.default_rng(2)
        X = rng.standard_normal((4, 7))
        G = rng.standard_normal((quad_dim(4), 7))
        dX = rng.standard_normal((4, 7))
        h = 1e-6
        dW = (khatri_rao_square(X + h * dX) - khatri_rao_square(X - h * dX)) / (2 * h)
        self.assertAlmostEqual(
            np.sum(G * dW), np.sum(khatri_rao_square_pullback(X, G) * dX), delta=1e-6
        )

    def test_pullback_shape_mismatch(self):
        with self.assertRaises(InputError):
            khatri_rao_square_pullback(np.ones((2, 3)), np.ones((2, 3)))


class TestExpandToFull(unittest.TestCase):
    """Test scattering compressed entries to the full layout"""

    def test_matches_kronecker(self):
        a, b = 1.7, -0.3
        x = np.array([a, b])
        assert_allclose(expand_to_full(compressed_square(x)), np.kron(x, x), rtol=1e-14)

    def test_zeros(self):
        assert_array_equal(expand_to_full(np.zeros(6)), np.zeros(9))

    def test_matrix_input(self):
        X = np.random.default_rng(3).standard_normal((3, 4))
        full = expand_to_full(khatri_rao_square(X))
        for k in range(4):
            assert_allclose(full[:, k], np.kron(X[:, k], X[:, k]), rtol=1e-14)

    def test_non_triangular_length(self):
        with self.assertRaises(InputError):
            expand_to_full(np.zeros(4))


if __name__ == '__main__':
    unittest.main()
