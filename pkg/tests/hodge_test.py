import unittest

import numpy as np

from numpy.testing import assert_allclose

from hodgeorbit.families import ELLIPTIC_POLARIZATION, elliptic_hodge_data, elliptic_point, line_flag
from hodgeorbit.hodge import (
    FlagPoint,
    PolarizedHodgeData,
    decomposition_from_filtration,
    domain_distance,
    filtration_from_decomposition,
    flag_direct_sum,
    flag_tensor_product,
    hodge_frame,
    hodge_metric,
    hodge_norm_sq,
    in_period_domain,
    is_horizontal,
    left_translate,
    random_flag,
    random_group_element,
    reference_metric,
    reference_point,
    translation_lipschitz_constant,
    unitary_translation,
)
from hodgeorbit.numlin import ContractError, operator_to_json, random_invertible


def horizontal_pair(phd, rng):
    '''
    A random flag with the dimensions of ``phd`` and a random operator with
    ``A F^p <= F^{p-1}``.
    '''
    basis = random_invertible(rng, phd.rank, spread=1.0)
    dims = phd.filtration_dims()
    coefficients = rng.standard_normal((phd.rank, phd.rank)) + 1j * rng.standard_normal((phd.rank, phd.rank))
    for column in range(phd.rank):
        rows = min([dims[p - 1] for p, dim in dims.items() if column < dim and p - 1 in dims] or [phd.rank])
        coefficients[rows:, column] = 0.0
    operator = basis.dot(coefficients).dot(np.linalg.inv(basis))
    flag = FlagPoint.from_bases({p: basis[:, :dim] for p, dim in dims.items()})
    return operator, flag


class TestPolarizedHodgeData(unittest.TestCase):
    def test_elliptic(self):
        phd = elliptic_hodge_data()
        self.assertEqual(phd.rank, 2)
        self.assertEqual(phd.weight, 1)
        self.assertEqual((phd.p_min, phd.p_max), (0, 1))
        self.assertEqual(phd.signature, (1, 1))
        self.assertEqual(phd.sign(1), 1.0)
        self.assertEqual(phd.sign(0), -1.0)
        self.assertEqual(dict(phd.filtration_dims()), {0: 2, 1: 1})

    def test_contract(self):
        self.assertRaises(ContractError, PolarizedHodgeData, 1, {0: 1, 1: 1}, np.eye(2))
        self.assertRaises(ContractError, PolarizedHodgeData, 0, {0: -1}, np.eye(1))
        self.assertRaises(ContractError, PolarizedHodgeData, 0, {0: 0}, np.eye(1))
        self.assertRaises(ContractError, PolarizedHodgeData, 0, {0: 2}, np.eye(3))
        self.assertRaises(ContractError, PolarizedHodgeData, 0, {0: 2}, [[1, 1], [0, 1]])
        self.assertRaises(ContractError, PolarizedHodgeData, 0, {0: 2}, np.diag([1.0, 0.0]))

    def test_zero_entries_trimmed(self):
        phd = PolarizedHodgeData(2, {3: 0, 2: 1, 1: 0, 0: 1}, np.eye(2))
        self.assertEqual(dict(phd.hodge_numbers), {0: 1, 1: 0, 2: 1})

    def test_direct_sum(self):
        phd = elliptic_hodge_data().direct_sum(PolarizedHodgeData(1, {0: 1}, [[-1.0]]))
        self.assertEqual(dict(phd.hodge_numbers), {0: 2, 1: 1})
        self.assertEqual(phd.signature, (1, 2))
        self.assertRaises(ContractError, elliptic_hodge_data().direct_sum, PolarizedHodgeData(0, {0: 1}, [[1.0]]))

    def test_tensor_product(self):
        phd = elliptic_hodge_data().tensor_product(elliptic_hodge_data())
        self.assertEqual(phd.weight, 2)
        self.assertEqual(dict(phd.hodge_numbers), {0: 1, 1: 2, 2: 1})
        self.assertEqual(phd.signature, (2, 2))

    def test_json(self):
        phd = elliptic_hodge_data()
        obj = phd.to_json()
        self.assertEqual(obj['hodge_numbers'], {'0': 1, '1': 1})
        loaded = PolarizedHodgeData.from_json(obj)
        self.assertEqual(loaded.weight, 1)
        assert_allclose(loaded.polarization, ELLIPTIC_POLARIZATION)
        self.assertRaises(ContractError, PolarizedHodgeData.from_json, {'weight': 1})
        bad = dict(obj, polarization=operator_to_json(np.eye(2)))
        self.assertRaises(ContractError, PolarizedHodgeData.from_json, bad)


class TestFlagPoint(unittest.TestCase):
    def test_steps(self):
        flag = elliptic_point(1j)
        self.assertEqual(dict(flag.dims()), {0: 2, 1: 1})
        self.assertEqual(flag.step(2).dim, 0)
        self.assertEqual(flag.step(-1).dim, 2)
        flag.check_dims(elliptic_hodge_data())

    def test_contract(self):
        # Lowest step must be the whole space.
        self.assertRaises(ContractError, FlagPoint.from_bases, {0: [[1, 0]], 1: [[1, 0]]})
        self.assertRaises(ContractError, FlagPoint.from_bases, {0: np.eye(3), 1: [[1, 0, 0]], 2: [[0, 1, 0]]})
        self.assertRaises(ContractError, FlagPoint.from_bases, {0: np.eye(2), 2: [[1, 0]]})
        self.assertRaises(ContractError, FlagPoint, {})
        flag = FlagPoint.from_bases({0: np.eye(3), 1: [[1, 0, 0]]})
        self.assertRaises(ContractError, flag.check_dims, elliptic_hodge_data())

    def test_json(self):
        flag = elliptic_point(0.5 + 2j)
        self.assertLess(domain_distance(FlagPoint.from_json(flag.to_json()), flag), 1e-12)
        self.assertRaises(ContractError, FlagPoint.from_json, {})


class TestPeriodDomain(unittest.TestCase):
    def setUp(self):
        self.phd = elliptic_hodge_data()

    def test_membership(self):
        report = in_period_domain(elliptic_point(1j), self.phd)
        self.assertTrue(report)
        self.assertIsNone(report.failed_p)
        # Orthonormal frame of span(e1 + i e2): Q(f, f) = 2 Im(tau) / |f|^2.
        self.assertAlmostEqual(report.margin, 1.0)

    def test_membership_frames(self):
        tau = 0.3 + 4j
        frames = {0: np.eye(2), 1: np.array([[1.0], [tau]])}
        report = in_period_domain(elliptic_point(tau), self.phd, frames)
        self.assertTrue(report)
        self.assertAlmostEqual(report.margin, 2 * tau.imag)
        self.assertEqual(sorted(report.to_dict()), ['failed_p', 'margin', 'margins', 'member', 'splits'])

    def test_outside(self):
        report = in_period_domain(elliptic_point(-1j), self.phd)
        self.assertFalse(report)
        self.assertEqual(report.failed_p, 1)
        self.assertLess(report.margin, 0)
        degenerate = in_period_domain(elliptic_point(0.7), self.phd)
        self.assertFalse(degenerate)
        self.assertEqual(degenerate.failed_p, 1)

    def test_decomposition(self):
        dec = decomposition_from_filtration(elliptic_point(1j), self.phd)
        dec.validate(self.phd.polarization)
        self.assertEqual({p: space.dim for p, space in dec.pieces.items()}, {0: 1, 1: 1})
        assert_allclose(hodge_metric(dec, self.phd.polarization), np.eye(2), atol=1e-12)
        assert_allclose(sum(dec.projectors().values()), np.eye(2), atol=1e-12)
        back = filtration_from_decomposition(dec)
        self.assertLess(domain_distance(back, elliptic_point(1j)), 1e-12)

    def test_decomposition_outside(self):
        with self.assertRaises(ContractError) as cm:
            decomposition_from_filtration(elliptic_point(-2j), self.phd)
        self.assertEqual(cm.exception.failed_p, 1)
        self.assertLess(cm.exception.margin, 0)

    def test_hodge_norm(self):
        # |e1|^2 = |tau|^2 / Im(tau) and |e2|^2 = 1 / Im(tau).
        for tau in (1j, 4j, 0.5 + 2j):
            dec = decomposition_from_filtration(elliptic_point(tau), self.phd)
            self.assertAlmostEqual(hodge_norm_sq([1, 0], dec, self.phd.polarization), abs(tau) ** 2 / tau.imag)
            self.assertAlmostEqual(hodge_norm_sq([0, 1], dec, self.phd.polarization), 1 / tau.imag)

    def test_hodge_norm_not_polarized(self):
        dec = decomposition_from_filtration(elliptic_point(1j), self.phd)
        self.assertRaises(ContractError, hodge_norm_sq, [1, 0], dec, -self.phd.polarization)

    def test_hodge_norm_positive_random(self):
        rng = np.random.RandomState(13)
        for phd in (self.phd, self.phd.tensor_product(self.phd)):
            for _ in range(10):
                point = left_translate(random_group_element(phd, rng), reference_point(phd))
                dec = decomposition_from_filtration(point, phd)
                for _ in range(50):
                    vector = rng.standard_normal(phd.rank) + 1j * rng.standard_normal(phd.rank)
                    self.assertGreater(hodge_norm_sq(vector, dec, phd.polarization), 0)

    def test_membership_unitary_invariance(self):
        rng = np.random.RandomState(17)
        for phd in (self.phd, self.phd.direct_sum(PolarizedHodgeData(1, {0: 1}, [[-1.0]]))):
            members = 0
            for _ in range(100):
                flag = random_flag(phd, rng)
                member = bool(in_period_domain(flag, phd))
                moved = left_translate(random_group_element(phd, rng), flag)
                self.assertEqual(bool(in_period_domain(moved, phd)), member)
                members += member
            self.assertGreater(members, 0)
            self.assertLess(members, 100)


class TestHorizontality(unittest.TestCase):
    def setUp(self):
        self.flag = FlagPoint.from_bases({0: np.eye(3), 1: np.eye(3)[:, :2], 2: np.eye(3)[:, :1]})

    def test_horizontal(self):
        nilpotent = np.zeros((3, 3))
        nilpotent[1, 0] = nilpotent[2, 1] = 1.0
        horizontal, residual = is_horizontal(nilpotent, self.flag)
        self.assertTrue(horizontal)
        self.assertLess(residual, 1e-14)

    def test_not_horizontal(self):
        nilpotent = np.zeros((3, 3))
        nilpotent[1, 0] = nilpotent[2, 1] = 1.0
        nilpotent[2, 0] = 0.01
        horizontal, residual = is_horizontal(nilpotent, self.flag)
        self.assertFalse(horizontal)
        self.assertAlmostEqual(residual, 0.01)

    def test_left_translate_random(self):
        rng = np.random.RandomState(7)
        phd = elliptic_hodge_data().tensor_product(elliptic_hodge_data())
        for _ in range(50):
            operator, flag = horizontal_pair(phd, rng)
            self.assertTrue(is_horizontal(operator, flag)[0])
            g = random_group_element(phd, rng).dot(random_invertible(rng, phd.rank))
            moved = g.dot(operator).dot(np.linalg.inv(g))
            horizontal, residual = is_horizontal(moved, left_translate(g, flag))
            self.assertTrue(horizontal, residual)


class TestGroupAction(unittest.TestCase):
    def setUp(self):
        self.phd = elliptic_hodge_data()

    def test_left_translate(self):
        unipotent = np.array([[1, 0], [-1, 1]])
        moved = left_translate(unipotent, elliptic_point(1j))
        self.assertLess(domain_distance(moved, elliptic_point(-1 + 1j)), 1e-12)
        self.assertRaises(ContractError, left_translate, np.zeros((2, 2)), elliptic_point(1j))

    def test_domain_distance(self):
        self.assertAlmostEqual(domain_distance(line_flag([1, 0]), line_flag([0, 1])), 1.0)
        self.assertRaises(ContractError, domain_distance, elliptic_point(1j),
                          FlagPoint.from_bases({0: np.eye(3), 1: np.eye(3)[:, :1]}))

    def test_reference_point(self):
        reference = reference_point(self.phd)
        self.assertLess(domain_distance(reference, elliptic_point(1j)), 1e-12)
        assert_allclose(reference_metric(self.phd), np.eye(2), atol=1e-12)

    def test_hodge_frame(self):
        frame = hodge_frame(elliptic_point(0.2 + 3j), self.phd)
        form = frame.conj().T.dot(self.phd.polarization).dot(frame)
        assert_allclose(form, np.diag([1.0, -1.0]), atol=1e-12)

    def test_unitary_translation(self):
        target = elliptic_point(0.5 + 2j)
        g = unitary_translation(reference_point(self.phd), target, self.phd)
        self.assertLess(domain_distance(left_translate(g, reference_point(self.phd)), target), 1e-10)
        assert_allclose(g.conj().T.dot(self.phd.polarization).dot(g), self.phd.polarization, atol=1e-10)
        self.assertRaises(ContractError, unitary_translation, reference_point(self.phd), elliptic_point(-1j),
                          self.phd)

    def test_random_group_element(self):
        rng = np.random.RandomState(3)
        for _ in range(5):
            g = random_group_element(self.phd, rng)
            assert_allclose(g.conj().T.dot(self.phd.polarization).dot(g), self.phd.polarization, atol=1e-10)
            self.assertTrue(in_period_domain(left_translate(g, reference_point(self.phd)), self.phd))

    def test_random_flag(self):
        phd = elliptic_hodge_data().tensor_product(elliptic_hodge_data())
        flag = random_flag(phd, np.random.RandomState(5))
        self.assertEqual(dict(flag.dims()), dict(phd.filtration_dims()))

    def test_translation_lipschitz_constant(self):
        kappa = translation_lipschitz_constant(self.phd, np.random.RandomState(11), samples=20)
        self.assertGreater(kappa, 0)
        self.assertLessEqual(kappa, 1.0 + 1e-6)


class TestFlagOperations(unittest.TestCase):
    def test_direct_sum(self):
        flag = flag_direct_sum(elliptic_point(1j), FlagPoint.from_bases({0: np.eye(1)}))
        self.assertEqual(dict(flag.dims()), {0: 3, 1: 1})
        phd = elliptic_hodge_data().direct_sum(PolarizedHodgeData(1, {0: 1}, [[-1.0]]))
        self.assertTrue(in_period_domain(flag, phd))

    def test_tensor_product(self):
        phd = elliptic_hodge_data().tensor_product(elliptic_hodge_data())
        flag = flag_tensor_product(elliptic_point(1j), elliptic_point(2j))
        self.assertEqual(dict(flag.dims()), {0: 4, 1: 3, 2: 1})
        self.assertTrue(in_period_domain(flag, phd))
