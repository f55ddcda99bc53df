import unittest

import numpy as np

from numpy.testing import assert_allclose

from hodgeorbit.families import (
    constant,
    elliptic,
    elliptic_hodge_data,
    elliptic_orbit_data,
    elliptic_plus_twist,
    elliptic_point,
    elliptic_squared,
    line_flag,
    twist,
    weight_two_orbit_data,
)
from hodgeorbit.hodge import domain_distance, is_horizontal
from hodgeorbit.monodromy import TWO_PI_I, decompose
from hodgeorbit.numlin import ContractError
from hodgeorbit.vhs import (
    OrbitData,
    VHSFamily,
    default_window,
    evaluate_grid,
    flat_section_norm,
    higgs_norm,
    limit_filtration,
    make_orbit_family,
    nilpotent_orbit,
    orbit_from_family,
    period_tangents,
    ray_gaps,
    twisted_frame_gram,
    untwisted_map,
)


class TestEvaluateGrid(unittest.TestCase):
    def test_order_kept(self):
        points = list(range(50))
        expected = [point ** 2 for point in points]
        self.assertEqual(evaluate_grid(lambda x: x ** 2, points, threads=1), expected)
        self.assertEqual(evaluate_grid(lambda x: x ** 2, points, threads=4), expected)
        self.assertEqual(evaluate_grid(lambda x: x ** 2, [], threads=4), [])


class TestFamily(unittest.TestCase):
    def setUp(self):
        self.family = elliptic()

    def test_period_map(self):
        for z in (-3.0, -5 + 1j, -12 - 2j):
            expected = elliptic_point(z / TWO_PI_I + np.exp(z))
            self.assertLess(domain_distance(self.family([z]), expected), 1e-12)

    def test_equivariance(self):
        self.assertLess(self.family.equivariance_residual([-4 + 0.5j]), 1e-10)
        self.assertTrue(self.family.membership([-4 + 0.5j]))

    def test_box(self):
        self.assertTrue(self.family.in_box([-3.0]))
        self.assertFalse(self.family.in_box([-1.0]))
        self.assertRaises(ContractError, self.family, [-3.0, -3.0])

    def test_contract(self):
        phd = elliptic_hodge_data()
        self.assertRaises(ContractError, VHSFamily, 'bad', phd, [np.eye(2)], self.family.period, x_max=0.0)
        self.assertRaises(ContractError, VHSFamily, 'bad', phd, [np.eye(2)], self.family.period, radius=-1.0)
        self.assertRaises(ContractError, VHSFamily, 'bad', phd, [np.diag([1j, 1.0])], self.family.period)
        self.assertRaises(ContractError, VHSFamily, 'bad', phd, [np.eye(3)], self.family.period)
        self.assertRaises(ContractError, VHSFamily, 'bad', phd, [np.eye(2)], self.family.period, alpha=[0, 1])

    def test_validate_leaving_domain(self):
        with self.assertRaises(ContractError) as cm:
            make_orbit_family(elliptic_orbit_data(-1j), x_max=-1.0)
        self.assertLess(cm.exception.margin, 0)

    def test_perturbation_at_zero(self):
        self.assertRaises(ContractError, make_orbit_family, elliptic_orbit_data(),
                          perturbation=lambda t, w: 2 * np.eye(2), x_max=-2.0)

    def test_to_json(self):
        obj = self.family.to_json()
        self.assertEqual(obj['name'], 'elliptic')
        self.assertEqual(obj['alpha'], [0.0])
        self.assertEqual(obj['x_max'], -2.0)
        self.assertEqual(obj['decay_log_order'], -1.0)
        self.assertIsNone(elliptic(amplitude=0.0).to_json()['decay_log_order'])

    def test_direct_sum(self):
        family = elliptic_plus_twist(beta=-1.0 / 3)
        self.assertEqual(family.phd.rank, 3)
        self.assertEqual(dict(family.phd.hodge_numbers), {0: 2, 1: 1})
        self.assertAlmostEqual(family.monodromy[0][2, 2], np.exp(TWO_PI_I * -1.0 / 3))
        self.assertEqual(family.decay_log_order, -1.0)
        self.assertTrue(family.membership([-6 + 1j]))

    def test_tensor_product(self):
        family = elliptic_squared()
        self.assertEqual(dict(family.phd.hodge_numbers), {0: 1, 1: 2, 2: 1})
        assert_allclose(family.monodromy[0], np.kron(elliptic().monodromy[0], elliptic().monodromy[0]), atol=1e-12)
        self.assertEqual(family.decay_log_order, -1.0)
        self.assertTrue(family.membership([-6 + 1j]))


class TestUntwistedMap(unittest.TestCase):
    def setUp(self):
        self.family = elliptic()
        self.dec = decompose(self.family.monodromy, self.family.alpha)

    def test_values(self):
        psi = untwisted_map(self.family, self.dec)
        for t in (0.1, 0.05j, -0.01):
            self.assertLess(domain_distance(psi([t]), line_flag([1.0, t])), 1e-10)
        self.assertRaises(ContractError, psi, [0.0])
        self.assertLess(psi.shift_residual([-3 + 0.2j]), 1e-10)

    def test_wrong_monodromy(self):
        family = VHSFamily('wrong', self.family.phd, [np.eye(2)], self.family.period, x_max=-2.0)
        self.assertRaises(ContractError, untwisted_map, family, decompose(family.monodromy, 0.0))

    def test_generator_count(self):
        dec = decompose([np.eye(2), np.eye(2)], 0.0)
        self.assertRaises(ContractError, untwisted_map, self.family, dec)

    def test_limit(self):
        report = limit_filtration(untwisted_map(self.family, self.dec))
        self.assertLess(domain_distance(report.limit, line_flag([1.0, 0.0])), 1e-7)
        self.assertLessEqual(report.gap, 1e-7)
        self.assertAlmostEqual(report.order, 1.0, delta=0.05)
        self.assertEqual(report.ranks, {0: 2, 1: 1})
        obj = report.to_dict()
        self.assertEqual(obj['ranks'], {'0': 2, '1': 1})
        self.assertEqual(len(obj['samples']), len(report.samples))

    def test_limit_other_angle(self):
        psi = untwisted_map(self.family, self.dec)
        first = limit_filtration(psi).limit
        second = limit_filtration(psi, angle=2.0).limit
        self.assertLess(domain_distance(first, second), 1e-7)

    def test_constant_limit(self):
        family = constant()
        report = limit_filtration(untwisted_map(family, decompose(family.monodromy, 0.0)))
        self.assertLess(domain_distance(report.limit, elliptic_point(1j)), 1e-12)
        self.assertTrue(np.isnan(report.order))

    def test_ray_gaps(self):
        psi = untwisted_map(self.family, self.dec)
        gaps = ray_gaps(psi, line_flag([1.0, 0.0]), [1e-2, 1e-4])
        self.assertEqual([radius for radius, _ in gaps], [1e-2, 1e-4])
        for radius, gap in gaps:
            self.assertAlmostEqual(gap / radius, 1.0, delta=1e-3)

    def test_orbit_from_family(self):
        orbit = orbit_from_family(self.family, self.dec)
        self.assertLess(domain_distance(orbit.limit_at(), line_flag([1.0, 0.0])), 1e-7)
        self.assertEqual(orbit.count, 1)


class TestNilpotentOrbit(unittest.TestCase):
    def test_membership_margin(self):
        theta = nilpotent_orbit(elliptic_orbit_data())
        for x in (-0.5, -5.0, -20.0):
            report = theta.membership(complex(x, 1.0))
            self.assertTrue(report)
            self.assertAlmostEqual(report.margin, abs(x) / np.pi)

    def test_threshold(self):
        theta = nilpotent_orbit(elliptic_orbit_data(-1j))
        self.assertFalse(theta.membership(-5.0))
        self.assertTrue(theta.membership(-8.0))

    def test_values(self):
        theta = nilpotent_orbit(elliptic_orbit_data())
        z = -3 + 2j
        self.assertLess(domain_distance(theta(z), elliptic_point(z / TWO_PI_I)), 1e-12)
        assert_allclose(theta.twist_operator([z]).dot(theta.twist_operator([-z])), np.eye(2), atol=1e-12)

    def test_membership_needs_hodge_data(self):
        theta = nilpotent_orbit(weight_two_orbit_data())
        self.assertRaises(ContractError, theta.membership, -1.0)

    def test_orbit_data_contract(self):
        limit = line_flag([1.0, 0.0])
        self.assertRaises(ContractError, OrbitData, limit, [], [])
        self.assertRaises(ContractError, OrbitData, limit, [np.zeros((2, 2))], [])
        self.assertRaises(ContractError, OrbitData, limit, [np.zeros((3, 3))], [np.zeros((3, 3))])
        skewed = weight_two_orbit_data(0.01)
        self.assertAlmostEqual(skewed.horizontality_residual(), 0.01)
        self.assertRaises(ContractError, OrbitData, skewed.limit_at(), skewed.semisimple, skewed.nilpotent)

    def test_default_window(self):
        orbit = twist(-1.0 / 3).orbit
        assert_allclose(default_window(orbit), [-1.0 / 3])
        self.assertEqual(default_window(elliptic_orbit_data()), [0.0])


class TestDerivatives(unittest.TestCase):
    def test_tangents_horizontal(self):
        family = elliptic_squared()
        tangents = period_tangents(family.period, np.array([-3 + 0.5j]), np.zeros(0, dtype=complex))
        self.assertEqual([label for label, _, _ in tangents], ['z0'])
        for _, flag, operator in tangents:
            self.assertLess(is_horizontal(operator, flag)[1], 1e-6)

    def test_higgs_norm(self):
        family = elliptic()
        in_z = higgs_norm(family, [-10.0])
        in_t = higgs_norm(family, [-10.0], coordinates='t')
        self.assertGreater(in_z, 0)
        self.assertAlmostEqual(in_t / in_z, 1.0, delta=1e-5)
        self.assertRaises(ContractError, higgs_norm, family, [-10.0], coordinates='w')

    def test_higgs_norm_constant(self):
        self.assertLess(higgs_norm(constant(), [-3.0]), 1e-8)


class TestSections(unittest.TestCase):
    def setUp(self):
        self.family = elliptic()
        self.dec = decompose(self.family.monodromy, self.family.alpha)

    def test_flat_section_norm(self):
        x = -20.0
        scale = abs(x) / (2 * np.pi)
        self.assertAlmostEqual(flat_section_norm(self.family, self.dec, [1, 0], [x]) / np.sqrt(scale), 1.0,
                               delta=1e-6)
        self.assertAlmostEqual(flat_section_norm(self.family, self.dec, [0, 1], [x]) * np.sqrt(scale), 1.0,
                               delta=1e-6)
        twisted = flat_section_norm(self.family, self.dec, [1, 0], [x], twisted=True)
        self.assertAlmostEqual(twisted / np.sqrt(2 * scale), 1.0, delta=1e-6)

    def test_twisted_frame_gram(self):
        gram = twisted_frame_gram(self.family, self.dec, [-5 + 1j])
        assert_allclose(gram, gram.conj().T, atol=1e-12)
        self.assertGreater(np.linalg.eigvalsh(gram).min(), 0)

    def test_twisted_frame_gram_twist(self):
        family = twist(-0.5)
        dec = decompose(family.monodromy, family.alpha)
        # |t|^beta rescaling makes the twisted section of norm one.
        assert_allclose(twisted_frame_gram(family, dec, [-7 + 3j]), [[1.0]], atol=1e-10)
