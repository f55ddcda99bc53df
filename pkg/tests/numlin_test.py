import unittest

import numpy as np
import scipy.linalg

from numpy.testing import assert_allclose

from hodgeorbit.numlin import (
    MAX_DIMENSION,
    ContractError,
    Subspace,
    ad_norm,
    as_columns,
    as_operator,
    check_commuting,
    commutator_residual,
    gap_distance,
    is_nilpotent,
    is_semisimple,
    joint_eigenblocks,
    log_unipotent,
    matrix_exp,
    matrix_from_json,
    matrix_to_json,
    nilpotency_order,
    operator_from_json,
    operator_to_json,
    orthonormalize,
    random_invertible,
    random_unitary_similar_tuple,
    spectrum,
    whole_space,
    zero_subspace,
)


UNIT_EIGENVALUES = np.exp(2j * np.pi * np.array([0.0, -0.25, -0.5, -0.75]))


def conjugated_unipotent(rng, size, scale=1.0):
    '''
    ``B exp(N) B^-1`` for a random strictly upper triangular N: one Jordan block of eigenvalue 1.
    '''
    nilpotent = np.triu(rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size)), 1)
    conjugator = random_invertible(rng, size)
    return conjugator.dot(scipy.linalg.expm(scale * nilpotent)).dot(np.linalg.inv(conjugator))


class TestOperators(unittest.TestCase):
    def test_as_operator(self):
        operator = as_operator([[1, 2], [3, 4]])
        self.assertEqual(operator.dtype, complex)
        self.assertFalse(operator.flags.writeable)
        self.assertRaises(ContractError, as_operator, [[1, 2, 3], [4, 5, 6]])
        self.assertRaises(ContractError, as_operator, [[1, np.nan], [0, 1]])
        self.assertRaises(ContractError, as_operator, [[1, np.inf], [0, 1]])
        self.assertRaises(ContractError, as_operator, np.zeros((0, 0)))
        self.assertRaises(ContractError, as_operator, np.eye(MAX_DIMENSION + 1))

    def test_as_columns(self):
        self.assertEqual(as_columns([1, 2, 3]).shape, (3, 1))
        self.assertEqual(as_columns(np.array([1, 2, 3])).shape, (3, 1))
        self.assertEqual(as_columns([[1, 0], [0, 1], [1, 1]]).shape, (2, 3))
        self.assertEqual(as_columns(np.ones((3, 2))).shape, (3, 2))
        self.assertRaises(ContractError, as_columns, [])

    def test_contract_error_details(self):
        err = ContractError('bad', residual=0.5, failed_p=1)
        self.assertEqual(err.residual, 0.5)
        self.assertEqual(err.failed_p, 1)
        self.assertEqual(err.details, {'residual': 0.5, 'failed_p': 1})
        self.assertIsInstance(err, ValueError)
        self.assertEqual(str(err), 'bad')

    def test_commutator_residual(self):
        self.assertEqual(commutator_residual(np.diag([1.0, 2.0]), np.diag([3.0, -1.0])), 0.0)
        self.assertEqual(commutator_residual(np.zeros((2, 2)), np.eye(2)), 0.0)
        a = np.array([[0, 1], [0, 0]], dtype=complex)
        self.assertGreater(commutator_residual(a, a.T), 0.5)
        self.assertRaises(ContractError, check_commuting, [a, a.T])
        self.assertEqual(check_commuting([np.eye(2), a]), 0.0)


class TestSubspace(unittest.TestCase):
    def test_orthonormalize(self):
        space = orthonormalize([[1, 1, 0], [2, 2, 0], [0, 0, 1]])
        self.assertEqual(space.dim, 2)
        self.assertEqual(space.ambient_dim, 3)
        assert_allclose(space.gram(), np.eye(2), atol=1e-12)
        self.assertLess(space.residual([1, 1, 0]), 1e-12)
        self.assertAlmostEqual(space.residual([1, -1, 0]), np.sqrt(2))

    def test_orthonormalize_with_metric(self):
        metric = np.array([[2, 1j], [-1j, 3]])
        space = orthonormalize(np.eye(2), metric)
        self.assertEqual(space.dim, 2)
        assert_allclose(space.gram(), np.eye(2), atol=1e-12)
        self.assertRaises(ContractError, orthonormalize, np.eye(2), np.diag([1.0, -1.0]))
        self.assertRaises(ContractError, orthonormalize, np.eye(2), np.array([[1, 1], [0, 1]]))

    def test_zero_and_whole(self):
        self.assertEqual(orthonormalize(np.zeros((3, 2))).dim, 0)
        self.assertEqual(zero_subspace(4).dim, 0)
        whole = whole_space(3, np.diag([1.0, 4.0, 9.0]))
        self.assertEqual(whole.dim, 3)
        assert_allclose(whole.gram(), np.eye(3), atol=1e-12)

    def test_not_orthonormal(self):
        self.assertRaises(ContractError, Subspace, np.array([[1.0], [1.0]]))
        self.assertEqual(Subspace(np.array([[1.0], [1.0]]), check=False).dim, 1)

    def test_projector(self):
        space = orthonormalize([[1, 1]])
        assert_allclose(space.projector(), 0.5 * np.ones((2, 2)), atol=1e-12)

    def test_gap_distance(self):
        angle = 0.3
        first = orthonormalize([[1, 0]])
        second = orthonormalize([[np.cos(angle), np.sin(angle)]])
        self.assertAlmostEqual(gap_distance(first, second), np.sin(angle))
        self.assertAlmostEqual(gap_distance(first, first), 0.0)
        self.assertEqual(gap_distance(whole_space(2), whole_space(2)), 0.0)
        self.assertRaises(ContractError, gap_distance, first, whole_space(2))

    def test_gap_distance_metric(self):
        first = orthonormalize([[1, 0]])
        second = orthonormalize([[0, 1]])
        self.assertAlmostEqual(gap_distance(first, second, np.diag([1.0, 5.0])), 1.0)

    def test_gap_distance_triangle(self):
        rng = np.random.RandomState(4)
        for _ in range(50):
            dim = rng.randint(2, 7)
            size = rng.randint(1, dim)
            first, second, third = [
                orthonormalize(rng.standard_normal((dim, size)) + 1j * rng.standard_normal((dim, size)))
                for _ in range(3)]
            noise = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            for metric in (None, noise.conj().T.dot(noise) + np.eye(dim)):
                direct = gap_distance(first, third, metric)
                self.assertLessEqual(direct, gap_distance(first, second, metric) + gap_distance(second, third, metric)
                                     + 1e-12)


class TestExponentials(unittest.TestCase):
    def test_matrix_exp(self):
        assert_allclose(matrix_exp(np.diag([0.0, np.log(2)])), np.diag([1.0, 2.0]), atol=1e-12)
        nilpotent = np.array([[0, 0], [1, 0]], dtype=complex)
        assert_allclose(matrix_exp(3 * nilpotent), np.eye(2) + 3 * nilpotent, atol=1e-12)
        self.assertRaises(FloatingPointError, matrix_exp, 1000 * np.eye(2))

    def test_log_unipotent(self):
        nilpotent = np.array([[0, 0, 0], [1, 0, 0], [2, 1, 0]], dtype=complex)
        assert_allclose(log_unipotent(matrix_exp(nilpotent)), nilpotent, atol=1e-10)
        assert_allclose(log_unipotent(np.eye(3)), np.zeros((3, 3)), atol=1e-14)
        with self.assertRaises(ContractError) as cm:
            log_unipotent(np.diag([1.0, 2.0]))
        self.assertGreater(cm.exception.residual, 0)

    def test_log_unipotent_random(self):
        rng = np.random.RandomState(8)
        for dim in range(1, 9):
            for _ in range(5):
                unipotent = conjugated_unipotent(rng, dim, scale=0.3)
                logarithm = log_unipotent(unipotent)
                self.assertTrue(is_nilpotent(logarithm))
                assert_allclose(matrix_exp(logarithm), unipotent, atol=1e-9 * np.abs(unipotent).max())

    def test_predicates(self):
        jordan = np.array([[1, 1], [0, 1]], dtype=complex)
        nilpotent = np.array([[0, 1], [0, 0]], dtype=complex)
        self.assertTrue(is_nilpotent(nilpotent))
        self.assertFalse(is_nilpotent(jordan))
        self.assertTrue(is_nilpotent(np.zeros((3, 3))))
        self.assertTrue(is_semisimple(np.diag([1.0, 2.0, 2.0])))
        self.assertTrue(is_semisimple(np.array([[1.0, 1.0], [0.0, 2.0]])))
        self.assertFalse(is_semisimple(jordan))

    def test_nilpotency_order(self):
        self.assertEqual(nilpotency_order(np.zeros((3, 3))), 0)
        self.assertEqual(nilpotency_order(np.array([[0, 0], [1, 0]])), 1)
        self.assertEqual(nilpotency_order(np.diag(np.ones(3), -1)), 3)
        self.assertRaises(ContractError, nilpotency_order, np.eye(2))

    def test_ad_norm(self):
        self.assertAlmostEqual(ad_norm(np.eye(3)), 1.0)
        self.assertAlmostEqual(ad_norm(np.diag([1.0, 2.0])), 2.0)
        for x in (-1.0, -10.0, -30.0):
            g = matrix_exp(x * np.diag([0.0, 0.5]))
            self.assertAlmostEqual(ad_norm(g) / np.exp(abs(x) / 2), 1.0)
        self.assertRaises(ContractError, ad_norm, np.array([[1.0, 0.0], [0.0, 0.0]]))

    def test_ad_norm_submultiplicative(self):
        rng = np.random.RandomState(6)
        for dim in (2, 3, 5, 17, 20):
            for _ in range(10):
                g = random_invertible(rng, dim, spread=1.0)
                h = random_invertible(rng, dim, spread=1.0)
                self.assertLessEqual(ad_norm(g.dot(h)), ad_norm(g) * ad_norm(h) * (1 + 1e-10))

    def test_ad_norm_large_dimension(self):
        g = np.diag(np.linspace(1.0, 3.0, 20))
        self.assertAlmostEqual(ad_norm(g), 3.0)


class TestSpectrum(unittest.TestCase):
    def test_spectrum(self):
        result = spectrum(np.diag([1.0, 1.0, 2.0]))
        self.assertEqual(len(result), 2)
        self.assertAlmostEqual(result[0][0], 1.0)
        self.assertEqual(result[0][1].dim, 2)
        self.assertAlmostEqual(result[1][0], 2.0)
        self.assertEqual(result[1][1].dim, 1)

    def test_spectrum_order(self):
        result = spectrum(np.diag([1j, 2.0, 1.0, -1j]))
        assert_allclose([value for value, _ in result], [-1j, 1.0, 2.0, 1j], atol=1e-12)

    def test_spectrum_companion(self):
        # x ** 2 - x - 1
        companion = np.array([[0.0, 1.0], [1.0, 1.0]])
        result = sorted(spectrum(companion), key=lambda item: item[0].real)
        golden = (1 + np.sqrt(5)) / 2
        assert_allclose([value for value, _ in result], [1 - golden, golden], atol=1e-12)
        for value, space in result:
            self.assertEqual(space.dim, 1)
            assert_allclose(companion.dot(space.basis), value * space.basis, atol=1e-12)

    def test_spectrum_defective(self):
        result = spectrum(np.array([[1, 1], [0, 1]], dtype=complex))
        self.assertEqual(len(result), 1)
        self.assertAlmostEqual(result[0][0], 1.0)
        self.assertEqual(result[0][1].dim, 2)

    def test_spectrum_conjugated_jordan_blocks(self):
        rng = np.random.RandomState(0)
        for size in (3, 4):
            operator = conjugated_unipotent(rng, size)
            # rounding scatters the Schur eigenvalues by about eps ** (1 / size)
            scattered = np.linalg.eigvals(operator)
            self.assertGreater(np.abs(scattered - 1.0).max(), 1e-7)
            result = spectrum(operator)
            self.assertEqual(len(result), 1)
            self.assertEqual(result[0][1].dim, size)
            self.assertLess(abs(result[0][0] - 1.0), 1e-10)
            blocks = joint_eigenblocks([operator], unit_tol=1e-8)
            self.assertEqual([block.dim for block in blocks], [size])

    def test_spectrum_two_jordan_blocks(self):
        rng = np.random.RandomState(3)
        first = scipy.linalg.expm(np.triu(rng.standard_normal((3, 3)), 1))
        second = -scipy.linalg.expm(np.triu(rng.standard_normal((4, 4)), 1))
        conjugator = random_invertible(rng, 7)
        operator = conjugator.dot(scipy.linalg.block_diag(first, second)).dot(np.linalg.inv(conjugator))
        result = sorted(spectrum(operator), key=lambda item: -item[0].real)
        self.assertEqual([space.dim for _, space in result], [3, 4])
        assert_allclose([value for value, _ in result], [1.0, -1.0], atol=1e-10)

    def test_joint_eigenblocks_random_tuples(self):
        rng = np.random.RandomState(11)
        for _ in range(50):
            dim = rng.randint(1, 9)
            operators = random_unitary_similar_tuple(rng, dim, rng.randint(1, 4))
            blocks = joint_eigenblocks(operators, unit_tol=1e-8)
            self.assertEqual(sum(block.dim for block in blocks), dim)
            for block in blocks:
                for operator, value in zip(operators, block.lambdas):
                    self.assertLess(np.abs(UNIT_EIGENVALUES - value).min(), 1e-8)
                    restricted = block.basis.conj().T.dot(operator).dot(block.basis)
                    self.assertTrue(is_nilpotent(restricted - value * np.eye(block.dim), tol=1e-6))

    def test_joint_eigenblocks(self):
        first = np.diag([1.0, 1.0, -1.0, -1.0])
        second = np.diag([1j, -1j, 1j, 1j])
        blocks = joint_eigenblocks([first, second], unit_tol=1e-8)
        self.assertEqual(sorted(block.dim for block in blocks), [1, 1, 2])
        for block in blocks:
            for operator, value in zip((first, second), block.lambdas):
                assert_allclose(operator.dot(block.basis), value * block.basis, atol=1e-12)

    def test_joint_eigenblocks_contract(self):
        self.assertRaises(ContractError, joint_eigenblocks, [])
        self.assertRaises(ContractError, joint_eigenblocks, [np.diag([1.0, 0.0])])
        self.assertRaises(ContractError, joint_eigenblocks, [np.diag([2.0, 1.0])], unit_tol=1e-8)
        a = np.array([[1, 1], [0, 1]], dtype=complex)
        self.assertRaises(ContractError, joint_eigenblocks, [a, a.T])

    def test_random_tuples_commute(self):
        rng = np.random.RandomState(7)
        for _ in range(20):
            dim = rng.randint(1, 7)
            operators = random_unitary_similar_tuple(rng, dim, 3)
            self.assertEqual(len(operators), 3)
            self.assertLess(check_commuting(operators), 1e-10)
            for operator in operators:
                moduli = np.abs(np.linalg.eigvals(operator))
                assert_allclose(moduli, np.ones(dim), atol=1e-3)


class TestJson(unittest.TestCase):
    def test_operator_json(self):
        operator = np.array([[1 + 2j, 0], [-1j, 3]])
        obj = operator_to_json(operator)
        self.assertEqual(obj['dim'], 2)
        self.assertEqual(obj['entries'][0], [1.0, 2.0])
        self.assertEqual(obj['entries'][2], [0.0, -1.0])
        assert_allclose(operator_from_json(obj), operator)

    def test_operator_json_errors(self):
        self.assertRaises(ContractError, operator_from_json, {'entries': []})
        self.assertRaises(ContractError, operator_from_json, {'dim': 2, 'entries': [[1, 0]]})
        self.assertRaises(ContractError, operator_from_json, None)

    def test_matrix_json(self):
        matrix = np.arange(6).reshape(3, 2) * (1 + 1j)
        obj = matrix_to_json(matrix)
        self.assertEqual(obj['shape'], [3, 2])
        assert_allclose(matrix_from_json(obj), matrix)
        self.assertRaises(ContractError, matrix_from_json, {'shape': [2, 2], 'entries': [[0, 0]]})
