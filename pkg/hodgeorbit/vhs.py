'''
Formula-driven variations of Hodge structure on the log cover.

A family is a period map ``Phi(z, w)`` with values in the compact dual,
defined for ``Re z_j <= x_max < 0`` and ``|w_k| <= radius``, together with
its monodromy and polarization. In the flat frame filtrations obey
``Phi(z + 2 pi i e_j, w) = T_j^-1 Phi(z, w)``, which is what makes the
untwisted map ``exp(sum z_j R_j) Phi(z, w)`` a function of ``t = e^z``.
'''
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg

from hodgeorbit.hodge import (
    FlagPoint,
    decomposition_from_filtration,
    domain_distance,
    flag_direct_sum,
    flag_tensor_product,
    hodge_metric,
    hodge_norm_sq,
    in_period_domain,
    is_horizontal,
    left_translate,
    reference_metric,
    reference_point,
)
from hodgeorbit.monodromy import (
    EQUIVARIANCE_TOLERANCE,
    TWO_PI_I,
    MonodromyTuple,
    deligne_frame,
    log_coordinates,
)
from hodgeorbit.numlin import (
    ContractError,
    VerificationError,
    as_operator,
    check_commuting,
    matrix_exp,
    operator_to_json,
    orthonormalize,
    zero_subspace,
)

LOGGER = logging.getLogger(__name__)

DERIVATIVE_STEP = 1e-5
LIMIT_TOLERANCE = 1e-7
SHIFT_TOLERANCE = 1e-8
POLARIZATION_TOLERANCE = 1e-9
RESIDUE_COMMUTATOR_TOLERANCE = 1e-9
HORIZONTAL_TOLERANCE = 1e-8
PERTURBATION_TOLERANCE = 1e-12
# Rays approach 0 through |t| = 2^-k for k in this range.
FIRST_RAY_EXPONENT = 4
LAST_RAY_EXPONENT = 20
RICHARDSON_LEVELS = 3
# Distances below this are treated as zero when fitting convergence orders.
ORDER_FLOOR = 1e-13
VALIDATION_DEPTH = 25.0
VALIDATION_COUNT = 5


def evaluate_grid(function, points, threads=None):
    '''
    ``[function(point) for point in points]``, evaluated on a thread pool.

    Results keep the order of ``points`` whatever the number of threads.

    :param threads: Worker count; 1 evaluates in the calling thread and None
        lets the executor choose.
    :type threads: int or None
    '''
    points = list(points)
    if threads == 1 or len(points) < 2:
        return [function(point) for point in points]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(function, points))


def moduli_coordinates(w, count):
    if w is None:
        return np.zeros(count, dtype=complex)
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if w.ndim != 1 or w.size != count:
        raise ContractError('expected %d moduli coordinates, got %s' % (count, w.tolist()))
    return w


def flag_from_frames(frames):
    '''
    FlagPoint spanned by a mapping p -> matrix of spanning columns.
    '''
    steps = {}
    for p, frame in frames.items():
        frame = np.asarray(frame, dtype=complex)
        steps[p] = orthonormalize(frame) if frame.shape[1] else zero_subspace(frame.shape[0])
    return FlagPoint(steps, check=False)


class VHSFamily(object):
    '''
    A period map with declared monodromy, polarization and domain box.

    :ivar name: Registry or user supplied name.
    :ivar phd: PolarizedHodgeData.
    :ivar monodromy: MonodromyTuple with one generator per log coordinate.
    :ivar period: Callable ``(z, w) -> FlagPoint`` on complex arrays.
    :ivar n_moduli: Number of w coordinates.
    :ivar x_max: Upper bound of every ``Re z_j``.
    :ivar radius: Bound of every ``|w_k|``.
    :ivar frames: Optional callable ``(z, w) -> {p: columns of F^p}``; when
        given, membership margins are measured in these frames.
    :ivar params: Parameters the family was built from, for reports.
    :ivar alpha: Default window for decomposing the monodromy.
    :ivar orbit: Preferred OrbitData, or None when only the limit of the
        untwisted map is available.
    :ivar decay_log_order: Log order of the distance between the period map
        and its nilpotent orbit when it is known in closed form, else None.
    '''
    def __init__(self, name, phd, monodromy, period, n_moduli=0, x_max=-1.0, radius=0.0, reference=None,
                 frames=None, params=None, alpha=None, orbit=None, decay_log_order=None):
        if not x_max < 0:
            raise ContractError('x_max must be negative, got %s' % x_max)
        if radius < 0:
            raise ContractError('radius must not be negative, got %s' % radius)
        if not isinstance(monodromy, MonodromyTuple):
            monodromy = MonodromyTuple(monodromy)
        if monodromy.rank != phd.rank:
            raise ContractError('monodromy has rank %d, the Hodge data rank %d' % (monodromy.rank, phd.rank))
        residual = monodromy.polarization_residual(phd.polarization)
        if residual > POLARIZATION_TOLERANCE:
            raise ContractError('monodromy does not preserve the polarization', residual=residual)
        self.name = name
        self.phd = phd
        self.monodromy = monodromy
        self.period = period
        self.n_moduli = int(n_moduli)
        self.x_max = float(x_max)
        self.radius = float(radius)
        self.frames = frames
        self.params = dict(params or {})
        self._reference = reference
        self.alpha = np.zeros(len(monodromy)) if alpha is None else np.atleast_1d(np.asarray(alpha, dtype=float))
        if self.alpha.size != len(monodromy):
            raise ContractError('alpha must hold %d values' % len(monodromy))
        self.orbit = orbit
        self.decay_log_order = decay_log_order
    def __repr__(self):
        return '%s(%r, count=%d, n_moduli=%d, rank=%d)' % (self.__class__.__name__, self.name, self.count,
                                                            self.n_moduli, self.phd.rank)

    @property
    def count(self):
        return len(self.monodromy)

    def coordinates(self, z, w=None):
        return log_coordinates(z, self.count), moduli_coordinates(w, self.n_moduli)

    def __call__(self, z, w=None):
        z, w = self.coordinates(z, w)
        return self.period(z, w)

    def in_box(self, z, w=None):
        z, w = self.coordinates(z, w)
        return bool(np.all(z.real <= self.x_max + 1e-12) and np.all(np.abs(w) <= self.radius + 1e-12))

    def membership(self, z, w=None):
        '''
        :rtype: hodgeorbit.hodge.MembershipReport
        '''
        z, w = self.coordinates(z, w)
        frames = self.frames(z, w) if self.frames is not None else None
        return in_period_domain(self.period(z, w), self.phd, frames)

    def equivariance_residual(self, z, w=None):
        '''
        Largest gap between ``Phi(z + 2 pi i e_j)`` and ``T_j^-1 Phi(z)``.
        '''
        z, w = self.coordinates(z, w)
        value = self.period(z, w)
        worst = 0.0
        for j, operator in enumerate(self.monodromy):
            shifted = z.copy()
            shifted[j] += TWO_PI_I
            expected = left_translate(np.linalg.inv(operator), value)
            worst = max(worst, domain_distance(self.period(shifted, w), expected))
        return worst

    def reference_point(self):
        if self._reference is None:
            self._reference = reference_point(self.phd)
        return self._reference

    def reference_metric(self):
        return reference_metric(self.phd, self.reference_point())

    def sample_points(self, count=VALIDATION_COUNT, depth=VALIDATION_DEPTH):
        '''
        A ``count x count`` grid in ``(Re z_j, Im z_j)`` for every generator,
        the other coordinates held at ``x_max - 1``, repeated over a few
        moduli values.
        '''
        xs = np.linspace(self.x_max - depth, self.x_max, count)
        ys = np.linspace(-np.pi, np.pi, count)
        moduli = [np.zeros(self.n_moduli, dtype=complex)]
        if self.n_moduli and self.radius:
            moduli.extend(np.full(self.n_moduli, 0.9 * self.radius * np.exp(1j * angle))
                          for angle in (0.0, 2 * np.pi / 3, 4 * np.pi / 3))
        points = []
        for w in moduli:
            for j in range(self.count):
                for x in xs:
                    for y in ys:
                        z = np.full(self.count, self.x_max - 1.0, dtype=complex)
                        z[j] = complex(x, y)
                        points.append((z, w))
        return points

    def validate(self, points=None, threads=None):
        '''
        Check equivariance and membership in D on sample points.

        :raises ContractError: At the first offending point; the error
            carries ``point`` and ``residual`` or ``margin``.
        '''
        if points is None:
            points = self.sample_points()

        def check(point):
            z, w = point
            return self.equivariance_residual(z, w), self.membership(z, w)

        results = evaluate_grid(check, points, threads)
        for (z, w), (residual, report) in zip(points, results):
            if residual > EQUIVARIANCE_TOLERANCE:
                raise ContractError('family %s is not equivariant at z=%s' % (self.name, z.tolist()),
                                    point=(z.tolist(), w.tolist()), residual=residual)
            if not report:
                raise ContractError('family %s leaves the period domain at z=%s (margin %.3g)'
                                    % (self.name, z.tolist(), report.margin),
                                    point=(z.tolist(), w.tolist()), margin=report.margin)
        LOGGER.info('Validated family %s on %d points: equivariance residual %.3g, smallest margin %.3g',
                    self.name, len(points), max(r for r, _ in results), min(m.margin for _, m in results))
        return self

    def to_json(self):
        return {
            'name': self.name,
            'params': self.params,
            'hodge': self.phd.to_json(),
            'monodromy': self.monodromy.to_json(),
            'n_moduli': self.n_moduli,
            'x_max': self.x_max,
            'radius': self.radius,
            'alpha': self.alpha.tolist(),
            'decay_log_order': self.decay_log_order,
        }


class UntwistedMap(object):
    '''
    ``Psi(t, w)`` with ``Psi(e^z, w) = exp(sum z_j (S_j + N_j)) Phi(z, w)``.
    '''
    def __init__(self, family, dec):
        self.family = family
        self.dec = dec

    def __repr__(self):
        return '%s(%r, alpha=%s)' % (self.__class__.__name__, self.family.name, self.dec.alpha.tolist())

    def at_log(self, z, w=None):
        z, w = self.family.coordinates(z, w)
        return left_translate(self.dec.untwist_operator(z), self.family.period(z, w))

    def __call__(self, t, w=None):
        t = np.atleast_1d(np.asarray(t, dtype=complex))
        if np.any(t == 0):
            raise ContractError('the untwisted map is evaluated at t != 0 only; use limit_filtration')
        return self.at_log(np.log(t), w)

    def shift_residual(self, z, w=None):
        '''
        Largest gap between the values at z and ``z + 2 pi i e_j``.
        '''
        z, w = self.family.coordinates(z, w)
        value = self.at_log(z, w)
        worst = 0.0
        for j in range(self.family.count):
            shifted = z.copy()
            shifted[j] += TWO_PI_I
            worst = max(worst, domain_distance(self.at_log(shifted, w), value))
        return worst


def untwisted_map(family, dec, points=None, tol=SHIFT_TOLERANCE):
    '''
    The untwisted map of a family, checked to be single-valued in t.

    :param dec: Decomposition of ``family.monodromy``.
    :type dec: hodgeorbit.monodromy.MonodromyDecomposition
    :rtype: UntwistedMap
    :raises ContractError: If a sampled 2 pi i shift changes the value by
        more than ``tol``.
    '''
    if dec.count != family.count:
        raise ContractError('decomposition has %d generators, the family %d' % (dec.count, family.count))
    psi = UntwistedMap(family, dec)
    if points is None:
        points = family.sample_points(count=3, depth=10.0)
    for z, w in points:
        residual = psi.shift_residual(z, w)
        if residual > tol:
            raise ContractError('untwisted map of %s is not single-valued at z=%s' % (family.name, z.tolist()),
                                point=(z.tolist(), w.tolist()), residual=residual)
    return psi


class LimitReport(object):
    '''
    :ivar limit: The extrapolated FlagPoint.
    :ivar gap: Gap between the last two extrapolants.
    :ivar order: Fitted convergence order, NaN for a constant map.
    :ivar samples: List of (|t|, gap to the limit).
    :ivar ranks: p -> numerical rank of the extrapolated step.
    :ivar angle: Argument of the ray.
    '''
    def __init__(self, limit, gap, order, samples, ranks, angle):
        self.limit = limit
        self.gap = float(gap)
        self.order = float(order)
        self.samples = samples
        self.ranks = ranks
        self.angle = float(angle)

    def __repr__(self):
        return '%s(gap=%.3g, order=%.3g)' % (self.__class__.__name__, self.gap, self.order)

    def to_dict(self):
        return {
            'angle': self.angle,
            'gap': self.gap,
            'order': self.order,
            'ranks': {str(p): rank for p, rank in self.ranks.items()},
            'limit': self.limit.to_json(),
            'samples': [[radius, distance] for radius, distance in self.samples],
        }


def _richardson(values, ratio=2.0, levels=RICHARDSON_LEVELS):
    '''
    Extrapolate a sequence sampled at ``|t| = ratio^-k`` towards ``t = 0``.

    :returns: The last and second to last extrapolants of the top level.
    '''
    table = [list(values)]
    for level in range(1, min(levels, len(values) - 2) + 1):
        factor = ratio ** level
        previous = table[-1]
        table.append([(factor * previous[k + 1] - previous[k]) / (factor - 1) for k in range(len(previous) - 1)])
    return table[-1][-1], table[-1][-2]


def limit_filtration(psi, w=None, angle=0.0, first=FIRST_RAY_EXPONENT, last=LAST_RAY_EXPONENT,
                     tol=LIMIT_TOLERANCE):
    '''
    Limit of ``Psi(t, w)`` as t approaches 0 along a ray.

    Every step of the filtration is written in the graph chart of the value at
    the smallest sampled t, ``G(t) = B(t) (B_ref^H B(t))^-1``, which is
    holomorphic in t; the chart values are Richardson-extrapolated.

    :param psi: Untwisted map.
    :type psi: UntwistedMap
    :param angle: Argument of the ray, the same for every coordinate.
    :rtype: LimitReport
    :raises VerificationError: If the extrapolants do not agree to ``tol``.
    '''
    count = psi.family.count
    radii = [2.0 ** -k for k in range(first, last + 1)]
    values = [psi(np.full(count, radius * np.exp(1j * angle)), w) for radius in radii]
    reference = values[-1]
    steps = {}
    previous_steps = {}
    ranks = {}
    for p, space in reference.steps.items():
        if not space.dim or space.dim == space.ambient_dim:
            steps[p] = previous_steps[p] = space
            ranks[p] = space.dim
            continue
        charts = []
        for value in values:
            basis = value.steps[p].basis
            charts.append(basis.dot(np.linalg.inv(space.basis.conj().T.dot(basis))))
        best, second = _richardson(charts)
        steps[p] = orthonormalize(best)
        previous_steps[p] = orthonormalize(second)
        ranks[p] = steps[p].dim
    if any(ranks[p] != reference.steps[p].dim for p in ranks):
        raise VerificationError('limit filtration changes rank: %s' % ranks)
    limit = FlagPoint(steps, check=False)
    gap = domain_distance(limit, FlagPoint(previous_steps, check=False))

    samples = [(radius, domain_distance(value, limit)) for radius, value in zip(radii, values)]
    usable = [(radius, distance) for radius, distance in samples if distance > ORDER_FLOOR]
    if len(usable) >= 3:
        order = np.polyfit(np.log([r for r, _ in usable]), np.log([d for _, d in usable]), 1)[0]
    else:
        order = np.nan
    report = LimitReport(limit, gap, order, samples, ranks, angle)
    LOGGER.debug('Limit along arg t = %.4g: gap %.3g, order %.4g', angle, gap, order)
    if gap > tol:
        raise VerificationError('limit of the untwisted map does not converge (gap %.3g)' % gap, report=report)
    return report


class OrbitData(object):
    '''
    Limit filtration and residues of a nilpotent orbit.

    :ivar semisimple: The ``S_i``.
    :ivar nilpotent: The ``N_i``.
    :ivar residues: ``R_i = S_i + N_i``.
    :ivar n_moduli: Number of w coordinates of the limit.
    :ivar phd: Optional PolarizedHodgeData.
    '''
    def __init__(self, limit, semisimple, nilpotent, n_moduli=0, phd=None, validate=True):
        self.semisimple = [as_operator(s) for s in semisimple]
        self.nilpotent = [as_operator(n) for n in nilpotent]
        if not self.semisimple or len(self.semisimple) != len(self.nilpotent):
            raise ContractError('orbit needs matching non-empty lists of semisimple and nilpotent parts')
        self.residues = [as_operator(s + n) for s, n in zip(self.semisimple, self.nilpotent)]
        check_commuting(self.semisimple + self.nilpotent, RESIDUE_COMMUTATOR_TOLERANCE)
        self._limit = limit
        self.n_moduli = int(n_moduli)
        self.phd = phd
        if self.limit_at().ambient_dim != self.rank:
            raise ContractError('limit filtration lives in C^%d, the residues in C^%d'
                                % (self.limit_at().ambient_dim, self.rank))
        if validate:
            residual = self.horizontality_residual()
            if residual > HORIZONTAL_TOLERANCE:
                raise ContractError('residues are not horizontal at the limit filtration', residual=residual)

    def __repr__(self):
        return '%s(count=%d, rank=%d)' % (self.__class__.__name__, self.count, self.rank)

    @classmethod
    def from_decomposition(cls, limit, dec, n_moduli=0, phd=None, validate=True):
        return cls(limit, dec.semisimple, dec.nilpotent, n_moduli=n_moduli, phd=phd, validate=validate)

    @property
    def count(self):
        return len(self.residues)

    @property
    def rank(self):
        return self.residues[0].shape[0]

    def limit_at(self, w=None):
        if callable(self._limit):
            return self._limit(moduli_coordinates(w, self.n_moduli))
        return self._limit

    def horizontality_residual(self, w=None):
        limit = self.limit_at(w)
        return max(is_horizontal(residue, limit)[1] for residue in self.residues)

    def to_json(self):
        return {
            'limit': self.limit_at().to_json(),
            'semisimple': [operator_to_json(s) for s in self.semisimple],
            'nilpotent': [operator_to_json(n) for n in self.nilpotent],
        }


class NilpotentOrbit(object):
    '''
    ``theta(z, w) = exp(-sum z_i R_i) a(w)``.
    '''
    def __init__(self, orbit):
        self.orbit = orbit

    def __repr__(self):
        return '%s(%r)' % (self.__class__.__name__, self.orbit)

    @property
    def count(self):
        return self.orbit.count

    @property
    def n_moduli(self):
        return self.orbit.n_moduli

    def coordinates(self, z, w=None):
        return log_coordinates(z, self.count), moduli_coordinates(w, self.n_moduli)

    def twist_operator(self, z):
        z = log_coordinates(z, self.count)
        return matrix_exp(-sum(zj * r for zj, r in zip(z, self.orbit.residues)))

    def frames(self, z, w=None):
        '''
        p -> ``exp(-sum z_i R_i)`` applied to the basis of ``a(w)^p``.
        '''
        z, w = self.coordinates(z, w)
        g = self.twist_operator(z)
        return {p: g.dot(space.basis) for p, space in self.orbit.limit_at(w).steps.items()}

    def __call__(self, z, w=None):
        z, w = self.coordinates(z, w)
        return left_translate(self.twist_operator(z), self.orbit.limit_at(w))

    def membership(self, z, w=None, phd=None):
        phd = phd or self.orbit.phd
        if phd is None:
            raise ContractError('membership of an orbit needs polarized Hodge data')
        z, w = self.coordinates(z, w)
        return in_period_domain(self(z, w), phd, self.frames(z, w))


def nilpotent_orbit(orbit):
    '''
    :type orbit: OrbitData
    :rtype: NilpotentOrbit
    '''
    return NilpotentOrbit(orbit)


def default_window(orbit):
    '''
    Largest real eigenvalue of each ``S_i``.
    '''
    return [float(np.max(scipy.linalg.eigvals(s).real)) for s in orbit.semisimple]


def orbit_direct_sum(first, second):
    phd = first.phd.direct_sum(second.phd) if first.phd is not None and second.phd is not None else None
    if first.n_moduli or second.n_moduli:
        def limit(w):
            return flag_direct_sum(first.limit_at(w), second.limit_at(w))
    else:
        limit = flag_direct_sum(first.limit_at(), second.limit_at())
    return OrbitData(limit,
                     [scipy.linalg.block_diag(a, b) for a, b in zip(first.semisimple, second.semisimple)],
                     [scipy.linalg.block_diag(a, b) for a, b in zip(first.nilpotent, second.nilpotent)],
                     n_moduli=max(first.n_moduli, second.n_moduli), phd=phd)


def orbit_tensor_product(first, second):
    phd = first.phd.tensor_product(second.phd) if first.phd is not None and second.phd is not None else None
    if first.n_moduli or second.n_moduli:
        def limit(w):
            return flag_tensor_product(first.limit_at(w), second.limit_at(w))
    else:
        limit = flag_tensor_product(first.limit_at(), second.limit_at())

    def combine(a, b):
        return np.kron(a, np.eye(b.shape[0])) + np.kron(np.eye(a.shape[0]), b)
    return OrbitData(limit,
                     [combine(a, b) for a, b in zip(first.semisimple, second.semisimple)],
                     [combine(a, b) for a, b in zip(first.nilpotent, second.nilpotent)],
                     n_moduli=max(first.n_moduli, second.n_moduli), phd=phd)


def make_orbit_family(orbit, phd=None, perturbation=None, name='orbit', x_max=-1.0, radius=0.0, reference=None,
                      params=None, alpha=None, points=None, threads=None, decay_log_order=None):
    '''
    A VHSFamily whose period map is a nilpotent orbit, optionally perturbed.

    The period map is ``exp(-sum z_i R_i) P(t, w) a(w)`` where the perturbation
    P is a matrix-valued function of ``t = e^z`` with ``P(0, w) = I``.
    Monodromy is ``exp(2 pi i R_i)``; the default window puts the largest
    eigenvalue of each ``S_i`` on its closed end, so decomposing with it
    returns the residues of the orbit.

    :param perturbation: Callable ``(t, w) -> matrix`` or None.
    :param decay_log_order: Known log order of the perturbation's distance
        decay, passed to the family.
    :raises ContractError: If the result is not equivariant or leaves D on
        the sample points; the error carries ``point`` and ``margin``.
    '''
    phd = phd or orbit.phd
    if phd is None:
        raise ContractError('an orbit family needs polarized Hodge data')
    theta = nilpotent_orbit(orbit)
    monodromy = MonodromyTuple([matrix_exp(TWO_PI_I * residue) for residue in orbit.residues])
    if perturbation is not None:
        at_zero = np.asarray(perturbation(np.zeros(orbit.count, dtype=complex),
                                          np.zeros(orbit.n_moduli, dtype=complex)), dtype=complex)
        if np.abs(at_zero - np.eye(orbit.rank)).max() > PERTURBATION_TOLERANCE:
            raise ContractError('perturbation must be the identity at t = 0')

    def frames(z, w):
        g = theta.twist_operator(z)
        if perturbation is not None:
            g = g.dot(perturbation(np.exp(z), w))
        return {p: g.dot(space.basis) for p, space in orbit.limit_at(w).steps.items()}

    def period(z, w):
        return flag_from_frames(frames(z, w))

    family = VHSFamily(name, phd, monodromy, period, n_moduli=orbit.n_moduli, x_max=x_max, radius=radius,
                       reference=reference, frames=frames, params=params, orbit=orbit,
                       alpha=default_window(orbit) if alpha is None else alpha,
                       decay_log_order=decay_log_order)
    return family.validate(points, threads)


def filtration_derivative(path, step):
    '''
    Derivative at ``s = 0`` of the steps of a holomorphic path of flags.

    Each step is followed in the aligned frame ``B(s) (B_0^H B(s))^-1``,
    which equals ``B_0`` at 0, and differentiated by central differences.

    :param path: Callable ``s -> FlagPoint`` for complex s.
    :param step: Difference step h.
    :returns: SortedDict-ordered dict p -> (B_0, dB/ds) for the proper steps.
    :rtype: dict
    '''
    base = path(0.0)
    after = path(step)
    before = path(-step)
    derivatives = {}
    for p, space in base.steps.items():
        if not space.dim or space.dim == space.ambient_dim:
            continue
        basis = space.basis

        def aligned(flag):
            moved = flag.steps[p].basis
            return moved.dot(np.linalg.inv(basis.conj().T.dot(moved)))
        derivatives[p] = (basis, (aligned(after) - aligned(before)) / (2 * step))
    return base, derivatives


def tangent_operator(flag, derivatives):
    '''
    An endomorphism A with ``A B_p = dB_p`` modulo ``F^p`` for every step.

    With ``U_p`` an orthonormal basis of the complement of ``F^{p+1}`` in
    ``F^p``, ``A = sum_p dB_p (B_p^H U_p) U_p^H``.
    '''
    dim = flag.ambient_dim
    operator = np.zeros((dim, dim), dtype=complex)
    for p, (basis, derivative) in derivatives.items():
        above = flag.step(p + 1)
        complement = basis - above.projector().dot(basis) if above.dim else basis
        local = orthonormalize(complement)
        if not local.dim:
            continue
        operator += derivative.dot(basis.conj().T.dot(local.basis)).dot(local.basis.conj().T)
    return operator


def _step(value):
    return DERIVATIVE_STEP * max(1.0, abs(value))


def period_tangents(evaluate, z, w):
    '''
    Tangent operators of ``evaluate(z, w)`` along every z and w coordinate.

    :returns: List of (label, base flag, operator).
    '''
    tangents = []
    for i in range(len(z)):
        def path(s, i=i):
            moved = z.copy()
            moved[i] += s
            return evaluate(moved, w)
        flag, derivatives = filtration_derivative(path, _step(z[i]))
        tangents.append(('z%d' % i, flag, tangent_operator(flag, derivatives)))
    for k in range(len(w)):
        def path(s, k=k):
            moved = w.copy()
            moved[k] += s
            return evaluate(z, moved)
        flag, derivatives = filtration_derivative(path, DERIVATIVE_STEP)
        tangents.append(('w%d' % k, flag, tangent_operator(flag, derivatives)))
    return tangents


def _graded_norm(operator, dec, metric):
    '''
    Hodge operator norm of the ``V^p -> V^{p-1}`` part of an endomorphism.
    '''
    projectors = dec.projectors()
    frames = {p: orthonormalize(space.basis, metric).basis
              for p, space in dec.pieces.items() if space.dim}
    norm = 0.0
    for p, frame in frames.items():
        if p - 1 not in frames:
            continue
        target = frames[p - 1]
        block = target.conj().T.dot(metric).dot(projectors[p - 1]).dot(operator).dot(frame)
        norm = max(norm, float(scipy.linalg.norm(block, 2)))
    return norm


def higgs_norm(family, z, w=None, coordinates='z'):
    '''
    Norm of the Higgs field at ``(z, w)`` for the Hodge metric and the
    Poincare metric of the punctured polydisk.

    In z-coordinates ``|dz_i|`` has Poincare length ``1 / (2 |Re z_i|)``; in
    t-coordinates the derivative along t is scaled by ``|t| |log |t|^2|``.
    w directions use the euclidean metric.

    :param coordinates: 'z' or 't'.
    :raises ContractError: If the point is outside D.
    '''
    z, w = family.coordinates(z, w)
    if coordinates not in ('z', 't'):
        raise ContractError("coordinates must be 'z' or 't', got %r" % (coordinates,))
    flag = family.period(z, w)
    dec = decomposition_from_filtration(flag, family.phd)
    metric = hodge_metric(dec, family.phd.polarization)
    total = 0.0
    for i in range(family.count):
        if coordinates == 'z':
            def path(s, i=i):
                moved = z.copy()
                moved[i] += s
                return family.period(moved, w)
            step = _step(z[i])
            scale = 2 * abs(z[i].real)
        else:
            origin = np.exp(z[i])

            def path(s, i=i, origin=origin):
                moved = z.copy()
                moved[i] += np.log1p(s / origin)
                return family.period(moved, w)
            step = DERIVATIVE_STEP * abs(origin)
            scale = abs(origin) * 2 * abs(z[i].real)
        base, derivatives = filtration_derivative(path, step)
        theta = _graded_norm(tangent_operator(base, derivatives), dec, metric)
        total += (theta * scale) ** 2
    for k in range(family.n_moduli):
        def path(s, k=k):
            moved = w.copy()
            moved[k] += s
            return family.period(z, moved)
        base, derivatives = filtration_derivative(path, DERIVATIVE_STEP)
        total += _graded_norm(tangent_operator(base, derivatives), dec, metric) ** 2
    return float(np.sqrt(total))


def flat_section_norm(family, dec, vector, z, w=None, twisted=False):
    '''
    Hodge norm of a section at ``Phi(z, w)`` in the flat frame.

    :param vector: Flat vector, or callable ``z -> vector``.
    :param twisted: Apply ``exp(-sum z_j R_j)`` first, giving the norm of
        the twisted section through ``vector``.
    :raises ContractError: If the point is outside D.
    '''
    z, w = family.coordinates(z, w)
    value = np.asarray(vector(z) if callable(vector) else vector, dtype=complex).ravel()
    if twisted:
        value = dec.twist_operator(z).dot(value)
    hodge = decomposition_from_filtration(family.period(z, w), family.phd)
    return float(np.sqrt(max(hodge_norm_sq(value, hodge, family.phd.polarization), 0.0)))


def twisted_frame_gram(family, dec, z, w=None):
    '''
    Hodge Gram matrix of the twisted frame rescaled by ``prod |t_j|^beta_j``.
    '''
    z, w = family.coordinates(z, w)
    frame = deligne_frame(dec)
    vectors = np.column_stack([entry(z) for entry in frame])
    scale = np.array([np.exp(np.dot(entry.betas, z.real)) for entry in frame])
    rescaled = vectors * scale
    hodge = decomposition_from_filtration(family.period(z, w), family.phd)
    metric = hodge_metric(hodge, family.phd.polarization)
    return rescaled.conj().T.dot(metric).dot(rescaled)


def orbit_from_family(family, dec, angle=0.0, validate=True):
    '''
    The orbit data of a family: the limit of its untwisted map with the
    residues of ``dec``.

    :rtype: OrbitData
    '''
    psi = untwisted_map(family, dec)
    if family.n_moduli:
        def limit(w):
            return limit_filtration(psi, w, angle=angle).limit
    else:
        limit = limit_filtration(psi, angle=angle).limit
    return OrbitData.from_decomposition(limit, dec, n_moduli=family.n_moduli, phd=family.phd, validate=validate)


def _common_window(first, second):
    if not np.allclose(first.alpha, second.alpha):
        LOGGER.warning('Families %s and %s use windows %s and %s; keeping the first', first.name, second.name,
                       first.alpha.tolist(), second.alpha.tolist())
    return first.alpha


def _combined_orbit(first, second, combine):
    if first.orbit is None or second.orbit is None:
        return None
    return combine(first.orbit, second.orbit)


def _combined_log_order(first, second):
    # The slower decaying summand or factor dominates.
    orders = [order for order in (first.decay_log_order, second.decay_log_order) if order is not None]
    return max(orders) if orders else None


def _combine_frames(first, second, combine):
    if first.frames is None or second.frames is None:
        return None

    def frames(z, w):
        left = first.frames(z, w)
        right = second.frames(z, w)
        return combine(left, right)
    return frames


def direct_sum_family(first, second, name=None):
    '''
    The direct sum of two families with the same weight, log coordinates
    and moduli.
    '''
    if first.count != second.count or first.n_moduli != second.n_moduli:
        raise ContractError('families %s and %s have different coordinates' % (first.name, second.name))
    phd = first.phd.direct_sum(second.phd)
    monodromy = [scipy.linalg.block_diag(a, b) for a, b in zip(first.monodromy, second.monodromy)]

    def period(z, w):
        return flag_direct_sum(first.period(z, w), second.period(z, w))

    def combine(left, right):
        keys = range(min(min(left), min(right)), max(max(left), max(right)) + 1)
        result = {}
        for p in keys:
            a = left.get(p, left[min(left)] if p < min(left) else np.zeros((first.phd.rank, 0)))
            b = right.get(p, right[min(right)] if p < min(right) else np.zeros((second.phd.rank, 0)))
            result[p] = scipy.linalg.block_diag(a, b)
        return result

    reference = flag_direct_sum(first.reference_point(), second.reference_point())
    return VHSFamily(name or '%s+%s' % (first.name, second.name), phd, monodromy, period,
                     n_moduli=first.n_moduli, x_max=min(first.x_max, second.x_max),
                     radius=min(first.radius, second.radius), reference=reference,
                     frames=_combine_frames(first, second, combine),
                     params={'summands': [first.name, second.name]}, alpha=_common_window(first, second),
                     orbit=_combined_orbit(first, second, orbit_direct_sum),
                     decay_log_order=_combined_log_order(first, second))


def tensor_product_family(first, second, name=None):
    '''
    The tensor product of two families with the same log coordinates and
    moduli; monodromy ``T_j x T'_j``.
    '''
    if first.count != second.count or first.n_moduli != second.n_moduli:
        raise ContractError('families %s and %s have different coordinates' % (first.name, second.name))
    phd = first.phd.tensor_product(second.phd)
    monodromy = [np.kron(a, b) for a, b in zip(first.monodromy, second.monodromy)]

    def period(z, w):
        return flag_tensor_product(first.period(z, w), second.period(z, w))

    reference = flag_tensor_product(first.reference_point(), second.reference_point())
    return VHSFamily(name or '%s*%s' % (first.name, second.name), phd, monodromy, period,
                     n_moduli=first.n_moduli, x_max=min(first.x_max, second.x_max),
                     radius=min(first.radius, second.radius), reference=reference,
                     params={'factors': [first.name, second.name]}, alpha=_common_window(first, second),
                     orbit=_combined_orbit(first, second, orbit_tensor_product),
                     decay_log_order=_combined_log_order(first, second))


def ray_gaps(psi, limit, radii, angle=0.0, w=None):
    '''
    ``d(Psi(t), a)`` for t on a ray, as a list of (|t|, gap).
    '''
    count = psi.family.count
    return [(radius, domain_distance(psi(np.full(count, radius * np.exp(1j * angle)), w), limit))
            for radius in radii]
