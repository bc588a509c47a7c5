import unittest

import numpy as np

from formrep.linalg import (
    RankAmbiguityError,
    as_complex_matrix,
    block_diag,
    column_independence,
    condition_number,
    frozen,
    is_invertible,
    null_basis,
    numerical_rank,
    orthonormal_complement,
    random_unitary,
)


class CoercionTests(unittest.TestCase):
    def test_empty_input_takes_shape(self) -> None:
        self.assertEqual(as_complex_matrix([], 0, 4).shape, (0, 4))

    def test_rejects_non_finite(self) -> None:
        with self.assertRaises(ValueError):
            as_complex_matrix([[np.nan]])
        with self.assertRaises(ValueError):
            as_complex_matrix([1.0, 2.0])

    def test_frozen_is_a_read_only_copy(self) -> None:
        source = np.eye(2)
        copy = frozen(source)
        source[0, 0] = 5.0
        self.assertEqual(copy[0, 0], 1.0)
        with self.assertRaises(ValueError):
            copy[0, 0] = 2.0


class RankTests(unittest.TestCase):
    def test_rank_and_null_space(self) -> None:
        matrix = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
        self.assertEqual(numerical_rank(matrix, 1e-8), 1)
        basis = null_basis(matrix, 1e-8)
        self.assertEqual(basis.shape, (3, 2))
        np.testing.assert_allclose(matrix @ basis, 0, atol=1e-12)

    def test_ambiguity_band(self) -> None:
        matrix = np.diag([1.0, 5e-9])
        self.assertEqual(numerical_rank(matrix, 1e-8), 1)
        with self.assertRaises(RankAmbiguityError) as ctx:
            numerical_rank(matrix, 1e-8, band=10.0)
        self.assertEqual(len(ctx.exception.singular_values), 2)

    def test_null_basis_edge_shapes(self) -> None:
        self.assertEqual(null_basis(np.zeros((0, 3)), 1e-8).shape, (3, 3))
        self.assertEqual(null_basis(np.zeros((2, 0)), 1e-8).shape, (0, 0))

    def test_orthonormal_complement(self) -> None:
        basis = np.array([[1.0], [1j]]) / np.sqrt(2)
        complement = orthonormal_complement(basis, 2)
        self.assertEqual(complement.shape, (2, 1))
        self.assertAlmostEqual(abs(np.vdot(basis[:, 0], complement[:, 0])), 0.0)


class ConditioningTests(unittest.TestCase):
    def test_invertibility(self) -> None:
        self.assertTrue(is_invertible(np.eye(3)))
        self.assertTrue(is_invertible(np.zeros((0, 0))))
        self.assertFalse(is_invertible(np.diag([1.0, 1e-12])))
        self.assertFalse(is_invertible(np.ones((2, 3))))

    def test_condition_number(self) -> None:
        self.assertAlmostEqual(condition_number(np.diag([4.0, 0.5])), 8.0)
        self.assertEqual(condition_number(np.zeros((2, 2))), float("inf"))

    def test_column_independence(self) -> None:
        self.assertAlmostEqual(column_independence(np.eye(2)), 1.0)
        self.assertLess(column_independence(np.array([[1.0, 2.0], [1.0, 2.0]])), 1e-12)
        self.assertEqual(column_independence(np.zeros((3, 0))), float("inf"))

    def test_random_unitary(self) -> None:
        q = random_unitary(np.random.default_rng(3), 4)
        np.testing.assert_allclose(q.conj().T @ q, np.eye(4), atol=1e-12)

    def test_block_diag(self) -> None:
        result = block_diag([np.eye(1), 2 * np.eye(2)])
        np.testing.assert_array_equal(np.diag(result), [1, 2, 2])
        self.assertEqual(block_diag([]).shape, (0, 0))


if __name__ == "__main__":
    unittest.main()
