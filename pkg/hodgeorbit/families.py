'''
Built-in example families.

Every example is constructed from closed-form orbit data and validated when
it is built. Families are looked up by name in ``REGISTRY`` or read from a
JSON manifest ``{"example": name, "params": {...}}``.
'''
import logging
import math
import os

import numpy as np
import simplejson

from sortedcontainers import SortedDict

from hodgeorbit.hodge import FlagPoint, PolarizedHodgeData
from hodgeorbit.monodromy import TWO_PI_I
from hodgeorbit.numlin import ContractError
from hodgeorbit.vhs import (
    OrbitData,
    VHSFamily,
    direct_sum_family,
    make_orbit_family,
    tensor_product_family,
)

LOGGER = logging.getLogger(__name__)

# Q(u, v) = i (u_1 conj(v_2) - u_2 conj(v_1)), signature (1, 1).
ELLIPTIC_POLARIZATION = np.array([[0, -1j], [1j, 0]])
# exp(2 pi i N) = [[1, 0], [-1, 1]]
ELLIPTIC_NILPOTENT = np.array([[0, 0], [-1, 0]]) / TWO_PI_I
ELLIPTIC_X_MAX = -2.0
ELLIPTIC_DECAY_LOG_ORDER = -1.0
MOVING_LIMIT_RADIUS = 0.5
MOVING_LIMIT_X_MAX = -4.0


class UnknownFamilyError(KeyError):
    '''
    Raised for a name which is not in the registry.
    '''
    def __init__(self, name):
        super(UnknownFamilyError, self).__init__(name)
        self.name = name

    def __str__(self):
        return "unknown family '%s'" % self.name


def line_flag(vector):
    '''
    The weight-one flag ``F^1 = span(vector) <= F^0 = C^2``.
    '''
    return FlagPoint.from_bases({0: np.eye(2), 1: [np.asarray(vector, dtype=complex)]})


def elliptic_hodge_data():
    return PolarizedHodgeData(1, {1: 1, 0: 1}, ELLIPTIC_POLARIZATION)


def elliptic_point(tau):
    '''
    The point ``span(e1 + tau e2)``; in D exactly when ``Im tau > 0``.
    '''
    return line_flag([1.0, tau])


def elliptic_orbit_data(offset=0.0):
    '''
    Unipotent orbit data with limit ``span(e1 + offset e2)``.

    With ``offset = -i s`` the orbit enters D only once ``|Re z| > 2 pi s``.
    '''
    return OrbitData(elliptic_point(offset), [np.zeros((2, 2))], [ELLIPTIC_NILPOTENT], phd=elliptic_hodge_data())


def weight_two_orbit_data(skew=0.0):
    '''
    ``N = E21 + E32 + skew E31`` on the flag ``e1 <= (e1, e2) <= C^3``.

    The flag is not polarized; with ``skew != 0``, N maps F^2 out of F^1.
    '''
    nilpotent = np.zeros((3, 3), dtype=complex)
    nilpotent[1, 0] = nilpotent[2, 1] = 1.0
    nilpotent[2, 0] = skew
    limit = FlagPoint.from_bases({0: np.eye(3), 1: np.eye(3)[:, :2], 2: np.eye(3)[:, :1]})
    return OrbitData(limit, [np.zeros((3, 3))], [nilpotent], validate=not skew)


def elliptic(amplitude=1.0):
    '''
    ``Phi(z) = span(e1 + (z / 2 pi i + amplitude e^z) e2)`` with unipotent
    monodromy; its untwisted map is ``span(e1 + amplitude t e2)``.

    The orbit and the period map differ by ``amplitude e^x`` in tau, seen
    through the Poincare metric at ``Im tau = |x| / 2 pi``, so their distance
    has log order -1.
    '''
    elementary = np.array([[0, 0], [1, 0]], dtype=complex)

    def perturbation(t, w):
        return np.eye(2) + amplitude * t[0] * elementary
    return make_orbit_family(elliptic_orbit_data(), perturbation=perturbation, name='elliptic',
                             x_max=ELLIPTIC_X_MAX, reference=elliptic_point(1j),
                             params={'amplitude': amplitude}, alpha=[0.0],
                             decay_log_order=ELLIPTIC_DECAY_LOG_ORDER if amplitude else None)


def elliptic_orbit():
    return make_orbit_family(elliptic_orbit_data(), name='elliptic_orbit', x_max=-1.0,
                             reference=elliptic_point(1j), alpha=[0.0])


def constant():
    '''
    The elliptic structure at ``tau = i`` with trivial monodromy.
    '''
    point = elliptic_point(1j)
    orbit = OrbitData(point, [np.zeros((2, 2))], [np.zeros((2, 2))], phd=elliptic_hodge_data())
    return make_orbit_family(orbit, name='constant', x_max=-1.0, reference=point, alpha=[0.0])


def twist(beta=-0.5, weight=0, p=None):
    '''
    Rank one, ``T = exp(2 pi i beta)``, Hodge type ``(p, weight - p)``.
    '''
    p = weight if p is None else int(p)
    phd = PolarizedHodgeData(weight, {p: 1}, [[1.0 if (weight - p) % 2 == 0 else -1.0]])
    orbit = OrbitData(FlagPoint.from_bases({p: np.eye(1)}), [[[beta]]], [np.zeros((1, 1))], phd=phd)
    return make_orbit_family(orbit, name='twist', x_max=-1.0, alpha=[math.ceil(beta)],
                             params={'beta': beta, 'weight': weight, 'p': p})


def elliptic_plus_twist(beta=-1.0 / 3, amplitude=1.0):
    '''
    The elliptic family plus a weight-one twist of type (0, 1); rank 3.
    '''
    family = direct_sum_family(elliptic(amplitude), twist(beta, weight=1, p=0), name='elliptic_plus_twist')
    family.params = {'beta': beta, 'amplitude': amplitude}
    return family.validate()


def elliptic_squared(amplitude=1.0):
    '''
    Tensor square of the elliptic family: weight 2, Hodge numbers (1, 2, 1),
    monodromy ``T x T``.
    '''
    first = elliptic(amplitude)
    family = tensor_product_family(first, first, name='elliptic_squared')
    family.params = {'amplitude': amplitude}
    return family.validate()


def moving_limit(radius=MOVING_LIMIT_RADIUS):
    '''
    Unipotent orbit with limit ``a(w) = span(e1 + w e2)`` over ``|w| <= radius``.
    '''
    def limit(w):
        return elliptic_point(w[0])
    orbit = OrbitData(limit, [np.zeros((2, 2))], [ELLIPTIC_NILPOTENT], n_moduli=1, phd=elliptic_hodge_data())
    return make_orbit_family(orbit, name='moving_limit', x_max=MOVING_LIMIT_X_MAX, radius=radius,
                             reference=elliptic_point(1j), params={'radius': radius}, alpha=[0.0])


class Example(object):
    '''
    A registry entry: builder, default parameters and a description.
    '''
    def __init__(self, build, defaults, description):
        self.build = build
        self.defaults = defaults
        self.description = description

    def __call__(self, **params):
        unknown = sorted(set(params) - set(self.defaults))
        if unknown:
            raise ContractError('unknown parameters %s, expected some of %s' % (unknown, sorted(self.defaults)))
        merged = dict(self.defaults)
        merged.update(params)
        return self.build(**merged)


REGISTRY = SortedDict({
    'constant': Example(constant, {}, 'elliptic point tau = i with trivial monodromy'),
    'elliptic': Example(elliptic, {'amplitude': 1.0}, 'unipotent weight one family with an e^z perturbation'),
    'elliptic_orbit': Example(elliptic_orbit, {}, 'unperturbed unipotent weight one orbit'),
    'twist': Example(twist, {'beta': -0.5, 'weight': 0, 'p': None}, 'rank one unitary twist'),
    'elliptic_plus_twist': Example(elliptic_plus_twist, {'beta': -1.0 / 3, 'amplitude': 1.0},
                                   'elliptic family plus a weight one twist'),
    'elliptic_squared': Example(elliptic_squared, {'amplitude': 1.0}, 'tensor square of the elliptic family'),
    'moving_limit': Example(moving_limit, {'radius': MOVING_LIMIT_RADIUS},
                            'unipotent orbit with a limit depending on one modulus'),
})


def read_manifest(path):
    '''
    :returns: (example name, params)
    :raises ContractError: If the manifest is not an object with a string
        ``example`` and an object ``params``.
    '''
    with open(path, 'r') as fh:
        try:
            manifest = simplejson.load(fh)
        except ValueError as err:
            raise ContractError('manifest %s is not valid JSON: %s' % (path, err))
    if not isinstance(manifest, dict) or not isinstance(manifest.get('example'), str):
        raise ContractError('manifest %s needs a string "example"' % path)
    params = manifest.get('params', {})
    if not isinstance(params, dict):
        raise ContractError('manifest %s has non-object "params"' % path)
    return manifest['example'], params


def load_family(name, params=None):
    '''
    Build a registry family by name, or from a manifest path.

    :param name: Registry name, or path of a JSON manifest.
    :type name: str
    :param params: Parameters overriding the defaults (and the manifest).
    :type params: dict or None
    :rtype: hodgeorbit.vhs.VHSFamily
    :raises UnknownFamilyError: If the name is not registered.
    '''
    merged = {}
    if name.endswith('.json') or os.path.isfile(name):
        name, merged = read_manifest(name)
    merged.update(params or {})
    if name not in REGISTRY:
        raise UnknownFamilyError(name)
    LOGGER.debug('Building family %s with %s', name, merged)
    family = REGISTRY[name](**merged)
    if not isinstance(family, VHSFamily):
        raise ContractError('registry entry %s did not build a family' % name)
    return family
