import os
import shutil
import tempfile
import unittest

import numpy as np
import simplejson

from hodgeorbit.families import (
    REGISTRY,
    UnknownFamilyError,
    elliptic_orbit_data,
    load_family,
    read_manifest,
    weight_two_orbit_data,
)
from hodgeorbit.numlin import ContractError
from hodgeorbit.vhs import VHSFamily


class TestRegistry(unittest.TestCase):
    def test_names(self):
        self.assertEqual(list(REGISTRY), ['constant', 'elliptic', 'elliptic_orbit', 'elliptic_plus_twist',
                                          'elliptic_squared', 'moving_limit', 'twist'])

    def test_build_all(self):
        for name in REGISTRY:
            family = load_family(name)
            self.assertIsInstance(family, VHSFamily)
            self.assertEqual(family.alpha.size, family.count)
            self.assertLess(family.monodromy.polarization_residual(family.phd.polarization), 1e-9)

    def test_unknown(self):
        with self.assertRaises(UnknownFamilyError) as cm:
            load_family('nosuch')
        self.assertEqual(str(cm.exception), "unknown family 'nosuch'")
        self.assertEqual(cm.exception.name, 'nosuch')
        self.assertIsInstance(cm.exception, KeyError)

    def test_unknown_parameter(self):
        self.assertRaises(ContractError, load_family, 'elliptic', {'nosuch': 1})

    def test_parameters(self):
        family = load_family('twist', {'beta': -0.25})
        self.assertEqual(family.params['beta'], -0.25)
        self.assertEqual(family.alpha.tolist(), [0.0])
        self.assertAlmostEqual(family.monodromy[0][0, 0], np.exp(-0.5j * np.pi))
        moving = load_family('moving_limit', {'radius': 0.25})
        self.assertEqual((moving.n_moduli, moving.radius), (1, 0.25))

    def test_twist_types(self):
        family = load_family('twist', {'beta': -0.5, 'weight': 1, 'p': 0})
        self.assertEqual(dict(family.phd.hodge_numbers), {0: 1})
        self.assertEqual(family.phd.signature, (0, 1))


class TestOrbitData(unittest.TestCase):
    def test_elliptic_orbit(self):
        orbit = elliptic_orbit_data()
        self.assertEqual(orbit.count, 1)
        self.assertEqual(orbit.rank, 2)
        self.assertLess(orbit.horizontality_residual(), 1e-12)

    def test_weight_two(self):
        self.assertLess(weight_two_orbit_data().horizontality_residual(), 1e-12)
        self.assertGreater(weight_two_orbit_data(0.01).horizontality_residual(), 1e-3)


class TestManifest(unittest.TestCase):
    def setUp(self):
        self.tempdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tempdir)

    def _write(self, content):
        path = os.path.join(self.tempdir, 'family.json')
        with open(path, 'w') as fh:
            fh.write(content)
        return path

    def test_read_manifest(self):
        path = self._write(simplejson.dumps({'example': 'twist', 'params': {'beta': -0.75}}))
        self.assertEqual(read_manifest(path), ('twist', {'beta': -0.75}))
        family = load_family(path)
        self.assertEqual(family.name, 'twist')
        self.assertEqual(family.params['beta'], -0.75)

    def test_params_override_manifest(self):
        path = self._write(simplejson.dumps({'example': 'twist', 'params': {'beta': -0.75}}))
        self.assertEqual(load_family(path, {'beta': -0.25}).params['beta'], -0.25)

    def test_invalid(self):
        self.assertRaises(ContractError, read_manifest, self._write('{not json'))
        self.assertRaises(ContractError, read_manifest, self._write('[1, 2]'))
        self.assertRaises(ContractError, read_manifest, self._write('{"example": 3}'))
        self.assertRaises(ContractError, read_manifest, self._write('{"example": "twist", "params": []}'))

    def test_unknown_example(self):
        path = self._write('{"example": "nosuch"}')
        self.assertRaises(UnknownFamilyError, load_family, path)

    def test_missing_file(self):
        self.assertRaises(IOError, read_manifest, os.path.join(self.tempdir, 'missing.json'))
