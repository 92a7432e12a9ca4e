"""Unit tests for snapshot centering and candidate bases"""
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from src.core.snapshots import (
    CenteringMode,
    candidate_basis,
    center,
    center_with_reference,
    concatenate,
    pod_projection_error,
    split_interleaved,
)
from src.utils.errors import InputError, NumericalError


class TestCentering(unittest.TestCase):
    """Test reference subtraction"""

    def test_identical_columns_mean(self):
        c = np.array([1.0, -2.0, 3.5])
        S = center(np.tile(c[:, None], (1, 4)), 'mean')
        assert_allclose(S.data, 0.0, atol=1e-15)
        assert_allclose(S.reference, c)

    def test_zero_mode(self):
        raw = np.arange(6.0).reshape(2, 3)
        S = center(raw, 'zero')
        assert_array_equal(S.data, raw)
        assert_array_equal(S.reference, [0.0, 0.0])
        self.assertEqual(S.centering_mode, CenteringMode.ZERO)

    def test_mean_rows_sum_to_zero(self):
        raw = np.random.default_rng(0).standard_normal((4, 6)) * 10
        S = center(raw, 'mean')
        self.assertLess(np.max(np.abs(S.data.sum(axis=1))), 1e-12 * np.abs(raw).max() * 6)

    def test_initial_mode(self):
        raw = np.random.default_rng(1).standard_normal((3, 5))
        S = center(raw, 'initial')
        assert_array_equal(S.data[:, 0], 0.0)
        assert_allclose(S.raw, raw)

    def test_custom_reference_mismatch(self):
        with self.assertRaises(InputError):
            center(np.ones((3, 2)), 'custom', custom_ref=np.ones(2))
        with self.assertRaises(InputError):
            center(np.ones((3, 2)), 'custom')

    def test_unknown_mode(self):
        with self.assertRaises(InputError):
            center(np.ones((3, 2)), 'median')

    def test_center_with_reference(self):
        reference = np.array([1.0, 2.0])
        S = center_with_reference(np.array([[1.0, 3.0], [2.0, 2.0]]), reference)
        assert_array_equal(S.data, [[0.0, 2.0], [0.0, 0.0]])

    def test_data_is_read_only(self):
        S = center(np.ones((2, 2)), 'zero')
        with self.assertRaises(ValueError):
            S.data[0, 0] = 5.0


class TestSplitting(unittest.TestCase):
    """Test trajectory helpers"""

    def test_split_interleaved(self):
        raw = np.arange(10.0).reshape(2, 5)
        train, test = split_interleaved(raw)
        assert_array_equal(train, raw[:, [0, 2, 4]])
        assert_array_equal(test, raw[:, [1, 3]])

    def test_split_needs_two_snapshots(self):
        with self.assertRaises(InputError):
            split_interleaved(np.ones((3, 1)))

    def test_concatenate(self):
        merged = concatenate([np.ones((2, 3)), np.zeros((2, 1))])
        self.assertEqual(merged.shape, (2, 4))
        with self.assertRaises(InputError):
            concatenate([np.ones((2, 3)), np.ones((3, 3))])


class TestCandidateBasis(unittest.TestCase):
    """Test thin SVD and projection"""

    def test_diagonal_data(self):
        basis = candidate_basis(center(np.diag([3.0, 2.0, 1.0]), 'zero'), 2)
        assert_allclose(basis.sigma[:2], [3.0, 2.0], rtol=1e-14)
        assert_allclose(np.abs(basis.V_tilde), np.eye(3)[:, :2], atol=1e-14)
        self.assertAlmostEqual(basis.total_energy, 14.0, places=12)

    def test_rank_one_data(self):
        rng = np.random.default_rng(2)
        s, v = rng.standard_normal(30), rng.standard_normal(5)
        for method in ('direct', 'gram'):
            basis = candidate_basis(center(np.outer(s, v), 'zero'), 1, method=method)
            self.assertAlmostEqual(
                basis.sigma[0], np.linalg.norm(s) * np.linalg.norm(v), delta=1e-10 * basis.sigma[0]
            )
            self.assertLess(np.max(basis.sigma[1:]), 1e-6 * basis.sigma[0])

    def test_full_basis_reproduces_data(self):
        raw = np.random.default_rng(3).standard_normal((8, 5))
        S = center(raw, 'mean')
        basis = candidate_basis(S, 5)
        residual = basis.V_tilde @ basis.S_tilde - S.data
        self.assertLessEqual(np.linalg.norm(residual), 1e-8 * np.linalg.norm(S.data))

    def test_auto_route_on_rank_one_tall_data(self):
        rng = np.random.default_rng(7)
        s, v = rng.standard_normal(40), rng.standard_normal(5)
        S = center(np.outer(s, v), 'zero')
        basis = candidate_basis(S, 5)
        self.assertEqual(basis.m, 5)
        assert_allclose(basis.sigma[0], np.linalg.norm(s) * np.linalg.norm(v), rtol=1e-10)
        self.assertLess(np.max(basis.sigma[1:]), 1e-10 * basis.sigma[0])
        residual = basis.V_tilde @ basis.S_tilde - S.data
        self.assertLessEqual(np.linalg.norm(residual), 1e-10 * np.linalg.norm(S.data))
        assert_allclose(basis.V_tilde.T @ basis.V_tilde, np.eye(5), atol=1e-10)

    def test_auto_route_on_mean_centered_tall_data(self):
        raw = np.random.default_rng(8).standard_normal((50, 6))
        S = center(raw, 'mean')
        basis = candidate_basis(S, 6)
        self.assertLess(basis.sigma[5], 1e-10 * basis.sigma[0])
        residual = basis.V_tilde @ basis.S_tilde - S.data
        self.assertLessEqual(np.linalg.norm(residual), 1e-10 * np.linalg.norm(S.data))

    def test_explicit_gram_route_rejects_unresolved_mode(self):
        rng = np.random.default_rng(9)
        S = center(np.outer(rng.standard_normal(40), rng.standard_normal(5)), 'zero')
        with self.assertRaises(NumericalError):
            candidate_basis(S, 5, method='gram')

    def test_gram_matches_direct(self):
        raw = np.random.default_rng(4).standard_normal((60, 8))
        S = center(raw, 'zero')
        direct = candidate_basis(S, 4, method='direct')
        gram = candidate_basis(S, 4, method='gram')
        assert_allclose(gram.sigma, direct.sigma, rtol=1e-10)
        overlap = np.abs(np.diag(direct.V_tilde.T @ gram.V_tilde))
        assert_allclose(overlap, 1.0, atol=1e-8)
        self.assertAlmostEqual(gram.total_energy, direct.total_energy, delta=1e-10 * direct.total_energy)

    def test_m_out_of_range(self):
        S = center(np.diag([3.0, 2.0, 1.0]), 'zero')
        with self.assertRaises(InputError):
            candidate_basis(S, 4)
        with self.assertRaises(InputError):
            candidate_basis(S, 0)
        with self.assertRaises(InputError):
            candidate_basis(S, 2, method='lanczos')

    def test_truncate(self):
        raw = np.random.default_rng(5).standard_normal((6, 6))
        basis = candidate_basis(center(raw, 'zero'), 5)
        small = basis.truncate(3)
        self.assertEqual(small.m, 3)
        assert_array_equal(small.V_tilde, basis.V_tilde[:, :3])
        assert_array_equal(small.S_tilde, basis.S_tilde[:3])
        self.assertEqual(small.total_energy, basis.total_energy)
        with self.assertRaises(InputError):
            basis.truncate(6)


class TestPodProjectionError(unittest.TestCase):
    """Test the tail-energy error formula"""

    def setUp(self):
        self.basis = candidate_basis(center(np.diag([3.0, 2.0, 1.0]), 'zero'), 3)

    def test_diagonal_tail(self):
        self.assertAlmostEqual(pod_projection_error(self.basis, 2), np.sqrt(1 / 14), places=12)

    def test_limits(self):
        self.assertAlmostEqual(pod_projection_error(self.basis, 0), 1.0, places=14)
        self.assertAlmostEqual(pod_projection_error(self.basis, 3), 0.0, places=14)

    def test_monotone_in_r(self):
        raw = np.random.default_rng(6).standard_normal((10, 7))
        basis = candidate_basis(center(raw, 'mean'), 6)
        errors = [pod_projection_error(basis, r) for r in range(7)]
        self.assertTrue(all(b <= a for a, b in zip(errors, errors[1:])))

    def test_r_above_m(self):
        with self.assertRaises(InputError):
            pod_projection_error(self.basis.truncate(2), 3)


if __name__ == '__main__':
    unittest.main()
