'''
Numerical checks of the asymptotic behaviour of period maps near the
boundary: extension of the untwisted map, horizontality of nilpotent
orbits, membership thresholds, distance decay, growth of Ad norms, parabolic
weights and Higgs field bounds.

Every check returns a :class:`CheckResult` carrying pass/fail, fitted values
and the samples it was computed from. Thresholds come from
``DEFAULT_TOLERANCES`` and may be overridden per call.
'''
import logging

import numpy as np
import scipy.linalg

from hodgeorbit.hodge import (
    domain_distance,
    is_horizontal,
    left_translate,
    translation_lipschitz_constant,
    unitary_translation,
)
from hodgeorbit.monodromy import (
    MonodromyTuple,
    TWO_PI_I,
    check_dual_pairing,
    decompose,
    deligne_frame,
    dual_frame_constancy,
    dual_monodromy,
    dual_window,
    shift_residual,
)
from hodgeorbit.numlin import (
    ContractError,
    ConvergenceError,
    TINY,
    VerificationError,
    ad_norm,
    as_operator,
    commutator_residual,
    is_nilpotent,
    is_semisimple,
    matrix_exp,
    nilpotency_order,
    random_unitary_similar_tuple,
)
from hodgeorbit.vhs import (
    evaluate_grid,
    flat_section_norm,
    higgs_norm,
    limit_filtration,
    nilpotent_orbit,
    orbit_from_family,
    period_tangents,
    twisted_frame_gram,
    untwisted_map,
)

LOGGER = logging.getLogger(__name__)

DEFAULT_SEED = 20240229

DEFAULT_TOLERANCES = {
    'horizontality': 1e-6,
    'decay_rate': 0.05,
    'decay_log_order': 0.3,
    'schmid': 0.1,
    'weight': 0.05,
    'log_order': 0.1,
    'pairing': 1e-9,
    'single_valued': 1e-8,
    'splitting': 1e-8,
    'commutator': 1e-9,
    'higgs_factor': 2.0,
    'ad_factor': 10.0,
    'ray_agreement': 1e-7,
    'frame_log_order': 6.0,
    'periodicity': 1e-8,
    'coordinate_agreement': 1e-6,
    'window_shift': 1e-8,
}

DECAY_WINDOW = (-30.0, -5.0)
DECAY_SAMPLES = 60
SCHMID_WINDOW = (-60.0, -8.0)
SCHMID_SAMPLES = 40
AD_WINDOW = (-50.0, 0.0)
AD_SAMPLES = 51
NILPOTENT_FIT_WINDOW = (10.0, 50.0)
THRESHOLD_WINDOW = (-30.0, -0.05)
THRESHOLD_SAMPLES = 60
WEIGHT_WINDOW = (1e-8, 1e-2)
WEIGHT_SAMPLES = 40
HIGGS_WINDOW = (-40.0, -5.0)
HIGGS_SAMPLES = 15
RAY_ANGLES = (0.0, 2 * np.pi / 3, 4 * np.pi / 3)
CHAIN_POINTS = (-5.0, -10.0, -15.0, -20.0)
PERIODIC_POINTS = (-5.0, -10.0, -20.0)
HORIZONTALITY_GRID = tuple(complex(x, y) for x in (-0.5, -1.0, -2.0, -5.0) for y in (0.0, 1.0))
# Distances at or below this are identically zero up to rounding.
VANISHING_DISTANCE = 1e-12
SPLITTING_TRIALS = 200


def merge_tolerances(overrides=None):
    '''
    ``DEFAULT_TOLERANCES`` updated with ``overrides``.

    :raises ContractError: For unknown keys or non-positive values.
    '''
    tolerances = dict(DEFAULT_TOLERANCES)
    for key, value in (overrides or {}).items():
        if key not in DEFAULT_TOLERANCES:
            raise ContractError('unknown tolerance %r, expected one of %s' % (key, sorted(DEFAULT_TOLERANCES)))
        value = float(value)
        if not value > 0:
            raise ContractError('tolerance %s must be positive, got %s' % (key, value))
        tolerances[key] = value
    return tolerances


class CheckResult(object):
    '''
    Outcome of one check.

    :ivar name: Check name.
    :ivar passed: Whether every threshold was met.
    :ivar details: JSON-ready fitted values and residuals.
    :ivar samples: Rows ``(Re z, Im z, |w|, value)``.
    :ivar quantity: Name of the sampled value.
    '''
    def __init__(self, name, passed, details=None, samples=None, quantity=None):
        self.name = name
        self.passed = bool(passed)
        self.details = details or {}
        self.samples = samples or []
        self.quantity = quantity

    def __repr__(self):
        return '%s(%r, passed=%s)' % (self.__class__.__name__, self.name, self.passed)

    def to_dict(self):
        result = {'name': self.name, 'passed': self.passed}
        if self.quantity:
            result['quantity'] = self.quantity
        result.update(self.details)
        return result


def _fit_line(xs, ys):
    '''
    Least squares slope and intercept with the largest absolute residual.
    '''
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    design = np.column_stack([xs, np.ones_like(xs)])
    coefficients = np.linalg.lstsq(design, ys, rcond=None)[0]
    residual = float(np.abs(design.dot(coefficients) - ys).max())
    return float(coefficients[0]), float(coefficients[1]), residual


class DecayFit(object):
    '''
    ``log(value) ~ delta x + beta log|x| + c`` by least squares.

    :ivar samples: List of (x, value).
    :ivar vanishing: True when every value is below ``VANISHING_DISTANCE``;
        delta is then infinite.
    '''
    def __init__(self, samples, delta, beta, residual, vanishing=False):
        self.samples = samples
        self.delta = float(delta)
        self.beta = float(beta)
        self.residual = float(residual)
        self.vanishing = bool(vanishing)

    def __repr__(self):
        return '%s(delta=%.4g, beta=%.4g, residual=%.3g)' % (self.__class__.__name__, self.delta, self.beta,
                                                             self.residual)

    @classmethod
    def fit(cls, samples):
        samples = sorted(samples)
        values = np.array([value for _, value in samples])
        if not len(values) or values.max() <= VANISHING_DISTANCE:
            return cls(samples, np.inf, 0.0, 0.0, vanishing=True)
        usable = [(x, value) for x, value in samples if value > 0]
        if len(usable) < 3:
            raise ContractError('a decay fit needs three positive samples, got %d' % len(usable))
        xs = np.array([x for x, _ in usable])
        design = np.column_stack([xs, np.log(np.abs(xs)), np.ones_like(xs)])
        target = np.log([value for _, value in usable])
        coefficients = np.linalg.lstsq(design, target, rcond=None)[0]
        residual = np.abs(design.dot(coefficients) - target).max()
        LOGGER.debug('Decay fit delta %.6g beta %.6g residual %.3g', coefficients[0], coefficients[1], residual)
        return cls(samples, coefficients[0], coefficients[1], residual)

    def to_dict(self):
        return {
            'delta': self.delta if np.isfinite(self.delta) else None,
            'beta': self.beta,
            'residual': self.residual,
            'vanishing': self.vanishing,
        }


class WeightEstimate(object):
    '''
    ``log|s(t)| ~ -beta_hat log|t| + logorder_hat log|log|t|| + c`` along a ray.

    :ivar window: (smallest, largest) sampled ``|t|``.
    :ivar stderr: Standard errors of (beta_hat, logorder_hat).
    :ivar degenerate: Constant norm; both estimates are then 0.
    '''
    def __init__(self, beta_hat, logorder_hat, window, stderr, residual, degenerate=False, samples=None):
        self.beta_hat = float(beta_hat)
        self.logorder_hat = float(logorder_hat)
        self.window = window
        self.stderr = stderr
        self.residual = float(residual)
        self.degenerate = bool(degenerate)
        self.samples = samples or []

    def __repr__(self):
        return '%s(beta_hat=%.4g, logorder_hat=%.4g)' % (self.__class__.__name__, self.beta_hat, self.logorder_hat)

    @classmethod
    def fit(cls, samples):
        radii = np.array([radius for radius, _ in samples])
        target = np.log([value for _, value in samples])
        window = (float(radii.min()), float(radii.max()))
        if np.ptp(target) <= 1e-12 * max(1.0, np.abs(target).max()):
            return cls(0.0, 0.0, window, (0.0, 0.0), 0.0, degenerate=True, samples=samples)
        logs = np.log(radii)
        design = np.column_stack([-logs, np.log(np.abs(logs)), np.ones_like(logs)])
        coefficients, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
        errors = design.dot(coefficients) - target
        dof = max(len(target) - 3, 1)
        covariance = errors.dot(errors) / dof * np.linalg.inv(design.T.dot(design))
        stderr = tuple(float(value) for value in np.sqrt(np.abs(np.diag(covariance)))[:2])
        return cls(coefficients[0], coefficients[1], window, stderr, np.abs(errors).max(), samples=samples)

    def to_dict(self):
        return {
            'beta_hat': self.beta_hat,
            'logorder_hat': self.logorder_hat,
            'window': list(self.window),
            'stderr': list(self.stderr),
            'residual': self.residual,
            'degenerate': self.degenerate,
        }


def _ray_point(count, radius, angle):
    return np.full(count, np.log(radius) + 1j * angle)


def family_orbit(family, dec):
    if family.orbit is not None:
        return family.orbit
    return orbit_from_family(family, dec)


def _single_variable(family, name):
    if family.count != 1:
        raise ContractError('%s is implemented for one log coordinate, %s has %d' % (name, family.name,
                                                                                      family.count))


def check_splitting(monodromy, dec, tolerances=None):
    '''
    Reassembly, commutators and exponent windows of a decomposition.
    '''
    tolerances = merge_tolerances(tolerances)
    reassembly = 0.0
    for operator, s, n in zip(monodromy, dec.semisimple, dec.nilpotent):
        rebuilt = matrix_exp(TWO_PI_I * (s + n))
        reassembly = max(reassembly, float(scipy.linalg.norm(rebuilt - operator, 2) / scipy.linalg.norm(operator, 2)))
    parts = dec.semisimple + dec.nilpotent
    commutator = max([commutator_residual(a, b) for i, a in enumerate(parts) for b in parts[i + 1:]] or [0.0])
    in_window = all(alpha - 1 < beta <= alpha for block in dec.blocks for beta, alpha in zip(block.betas, dec.alpha))
    passed = reassembly <= tolerances['splitting'] and commutator <= tolerances['commutator'] and in_window
    return CheckResult('splitting', passed, {
        'reassembly': reassembly,
        'commutator': commutator,
        'in_window': in_window,
        'slack': dec.slack(),
        'condition': dec.condition,
    })


def check_single_valuedness(family, dec, tolerances=None, points=5):
    '''
    Shift residuals of every twisted frame entry and of the untwisted map.
    '''
    tolerances = merge_tolerances(tolerances)
    frame = deligne_frame(dec)
    xs = np.linspace(family.x_max - 20, family.x_max, points)
    ys = np.linspace(-np.pi, np.pi, points)
    worst = 0.0
    samples = []
    for j in range(family.count):
        for x, y in zip(xs, ys):
            z = np.full(family.count, family.x_max - 1.0, dtype=complex)
            z[j] = complex(x, y)
            residual = max(shift_residual(entry, z, family.monodromy) for entry in frame)
            samples.append((x, y, 0.0, residual))
            worst = max(worst, residual)
    psi = untwisted_map(family, dec, points=family.sample_points(count=3, depth=10.0), tol=np.inf)
    untwisted = max(psi.shift_residual(z, w) for z, w in family.sample_points(count=3, depth=10.0))
    passed = worst <= tolerances['single_valued'] and untwisted <= tolerances['single_valued']
    return CheckResult('single_valuedness', passed, {'frame_residual': worst, 'untwisted_residual': untwisted},
                       samples, 'shift_residual')


def check_dual(monodromy, dec, tolerances=None, hermitian=False, angle=0.3):
    '''
    Pairing of block bases with the dual decomposition, and constancy of the
    pairing of twisted frames along a ray.
    '''
    tolerances = merge_tolerances(tolerances)
    dual = dual_monodromy(monodromy, hermitian=hermitian)
    dual_dec = decompose(dual, dual_window(dec), cluster_tol=dual.cluster_tol)
    report = check_dual_pairing(dec, dual_dec, tol=tolerances['pairing'], hermitian=hermitian)
    details = {'pairing': report.to_dict(), 'dual_alpha': dual_dec.alpha.tolist()}
    passed = report.passed
    if not hermitian:
        zs = [_ray_point(len(monodromy), radius, angle) for radius in np.logspace(-8, -1, 8)]
        constancy = dual_frame_constancy(dec, dual_dec, zs)
        details['constancy'] = constancy
        passed = passed and constancy <= tolerances['pairing']
    return CheckResult('dual_pairing', passed, details)


def check_extension(family, dec, w=None, angles=RAY_ANGLES, tolerances=None):
    '''
    Limits of the untwisted map along several rays must exist and agree.
    '''
    tolerances = merge_tolerances(tolerances)
    psi = untwisted_map(family, dec)
    reports = []
    for angle in angles:
        try:
            reports.append(limit_filtration(psi, w, angle=angle, tol=tolerances['ray_agreement']))
        except VerificationError as err:
            LOGGER.error('Ray at angle %.4g does not converge: %s', angle, err)
            return CheckResult('extension', False, {'diverging_angle': angle,
                                                    'ray': err.report.to_dict() if err.report else None})
    agreement = max([domain_distance(a.limit, b.limit) for i, a in enumerate(reports) for b in reports[i + 1:]]
                    or [0.0])
    samples = [(np.log(radius), angle, 0.0, distance)
               for report, angle in zip(reports, angles) for radius, distance in report.samples]
    passed = agreement <= tolerances['ray_agreement']
    return CheckResult('extension', passed, {
        'agreement': agreement,
        'rays': [report.to_dict() for report in reports],
    }, samples, 'gap_to_limit')


def check_family_horizontality(family, rng, count=20, tolerances=None):
    '''
    Horizontality of finite-difference tangents of the period map at random
    points of the box.
    '''
    tolerances = merge_tolerances(tolerances)
    worst = 0.0
    samples = []
    for _ in range(count):
        z = (family.x_max - 20 * rng.random_sample(family.count)) + 1j * rng.uniform(-np.pi, np.pi, family.count)
        w = 0.9 * family.radius * rng.random_sample(family.n_moduli) * np.exp(
            2j * np.pi * rng.random_sample(family.n_moduli))
        for _, flag, operator in period_tangents(family.period, z, w):
            residual = is_horizontal(operator, flag)[1]
            worst = max(worst, residual)
        samples.append((z[0].real, z[0].imag, float(np.abs(w).max()) if len(w) else 0.0, worst))
    return CheckResult('family_horizontality', worst <= tolerances['horizontality'], {'residual': worst},
                       samples, 'horizontality_residual')


def check_orbit_horizontality(orbit, grid=HORIZONTALITY_GRID, w=None, tolerances=None):
    '''
    Largest horizontality residual of the z and w derivatives of a nilpotent
    orbit over ``grid`` (values of every log coordinate).
    '''
    tolerances = merge_tolerances(tolerances)
    theta = nilpotent_orbit(orbit)
    worst = 0.0
    samples = []
    for value in grid:
        z, moduli = theta.coordinates(np.full(orbit.count, value), w)
        residual = 0.0
        for _, flag, operator in period_tangents(lambda z, w: theta(z, w), z, moduli):
            residual = max(residual, is_horizontal(operator, flag)[1])
        samples.append((value.real, value.imag, float(np.abs(moduli).max()) if len(moduli) else 0.0, residual))
        worst = max(worst, residual)
    return CheckResult('orbit_horizontality', worst <= tolerances['horizontality'], {'residual': worst},
                       samples, 'horizontality_residual')


def orbit_threshold(orbit, phd=None, x_range=THRESHOLD_WINDOW, samples=THRESHOLD_SAMPLES, y_samples=5, w=None,
                    tolerances=None):
    '''
    Smallest C such that the orbit lies in D for all sampled ``Re z <= -C``,
    ``|Im z| <= 2 pi``.

    Margins are measured in the translated frames of the limit. The margin
    curve holds the smallest margin over Im z at each Re z; membership at
    ``y`` and ``y + 2 pi`` is compared as a periodicity check.
    '''
    tolerances = merge_tolerances(tolerances)
    theta = nilpotent_orbit(orbit)
    if orbit.count != 1:
        raise ContractError('orbit_threshold needs one log coordinate, got %d' % orbit.count)
    xs = np.linspace(x_range[0], x_range[1], samples)
    ys = np.linspace(-np.pi, np.pi, y_samples)
    curve = []
    periodicity = 0.0
    rows = []
    for x in xs:
        margins = []
        for y in ys:
            report = theta.membership(complex(x, y), w, phd)
            shifted = theta.membership(complex(x, y) + TWO_PI_I, w, phd)
            margins.append(report.margin if report else -abs(report.margin))
            if bool(report) != bool(shifted):
                periodicity = np.inf
            else:
                periodicity = max(periodicity, abs(report.margin - shifted.margin) / max(1.0, abs(report.margin)))
        curve.append((float(x), float(min(margins)), all(m > 0 for m in margins)))
        rows.append((float(x), 0.0, 0.0, float(min(margins))))
    if not curve[0][2]:
        return CheckResult('orbit_threshold', False, {'c_hat': None, 'periodicity': periodicity}, rows, 'margin')
    last = 0
    while last + 1 < len(curve) and curve[last + 1][2]:
        last += 1
    c_hat = -curve[last][0]
    member = [margin for _, margin, inside in curve[:last + 1]]
    # Margins are sampled with x ascending, so they should not increase.
    monotone = all(a >= b - 1e-9 * max(1.0, abs(a)) for a, b in zip(member, member[1:]))
    passed = periodicity <= tolerances['periodicity']
    LOGGER.debug('Orbit threshold C_hat %.4g, monotone %s, periodicity %.3g', c_hat, monotone, periodicity)
    return CheckResult('orbit_threshold', passed, {
        'c_hat': float(c_hat),
        'monotone': monotone,
        'periodicity': float(periodicity),
    }, rows, 'margin')


def _decay_value(family, theta, reference, metric, z, w):
    g = unitary_translation(reference, family.period(z, w), family.phd)
    return domain_distance(left_translate(np.linalg.inv(g), theta(z, w)), reference, metric)


def distance_decay(family, dec, orbit=None, x_range=DECAY_WINDOW, samples=DECAY_SAMPLES, y=0.0, w=None,
                   tolerances=None, threads=None):
    '''
    Decay of ``d(g(z)^-1 theta(z), o)`` with ``g(z) o = Phi(z)``.

    The rate must not fall below the slack ``1 - (beta_max - beta_min)``. The
    log order must not exceed ``3 m``, where m is the nilpotency order of N:
    ``2 m`` from ``Ad exp(x N)`` and m from the growth of ``Ad g(z)^-1``.
    When the family declares ``decay_log_order`` the fitted log order must
    also match it.

    :rtype: tuple of (CheckResult, DecayFit)
    :raises ContractError: If Phi leaves D on the window or g(z) is badly
        conditioned.
    '''
    tolerances = merge_tolerances(tolerances)
    _single_variable(family, 'distance_decay')
    orbit = orbit or family_orbit(family, dec)
    theta = nilpotent_orbit(orbit)
    reference = family.reference_point()
    metric = family.reference_metric()
    xs = -np.logspace(np.log10(-x_range[1]), np.log10(-x_range[0]), samples)[::-1]
    moduli = family.coordinates(np.full(family.count, -1.0), w)[1]

    def value(x):
        return _decay_value(family, theta, reference, metric, np.full(family.count, complex(x, y)), moduli)
    values = evaluate_grid(value, xs, threads)
    fit = DecayFit.fit(list(zip(xs.tolist(), values)))
    slack = min(dec.slack())
    bound = 3 * max(nilpotency_order(n) for n in dec.nilpotent)
    expected = family.decay_log_order
    rate_ok = fit.delta > 0 and fit.delta >= slack - tolerances['decay_rate']
    order_ok = fit.beta <= bound + tolerances['decay_log_order']
    if expected is not None:
        order_ok = order_ok and abs(fit.beta - expected) <= tolerances['decay_log_order']
    passed = fit.vanishing or (rate_ok and order_ok)
    rows = [(float(x), y, float(np.abs(moduli).max()) if len(moduli) else 0.0, float(v)) for x, v in zip(xs, values)]
    return CheckResult('distance_decay', passed, dict(fit.to_dict(), slack=slack, log_order_bound=bound,
                                                        expected_log_order=expected), rows, 'distance'), fit


def periodic_reduction(family, dec, orbit=None, xs=PERIODIC_POINTS, y=0.3, w=None, tolerances=None):
    '''
    Distance-decay values at ``y`` and ``y + 2 pi`` must agree.
    '''
    tolerances = merge_tolerances(tolerances)
    _single_variable(family, 'periodic_reduction')
    theta = nilpotent_orbit(orbit or family_orbit(family, dec))
    reference = family.reference_point()
    metric = family.reference_metric()
    moduli = family.coordinates(np.full(family.count, -1.0), w)[1]
    worst = 0.0
    rows = []
    for x in xs:
        z = np.full(family.count, complex(x, y))
        first = _decay_value(family, theta, reference, metric, z, moduli)
        second = _decay_value(family, theta, reference, metric, z + TWO_PI_I, moduli)
        worst = max(worst, abs(first - second))
        rows.append((x, y, 0.0, abs(first - second)))
    return CheckResult('periodic_reduction', worst <= tolerances['periodicity'], {'difference': worst},
                       rows, 'period_difference')


def distance_chain(family, dec, orbit=None, xs=CHAIN_POINTS, y=0.0, w=None, rng=None, tolerances=None):
    '''
    Terms of the one-variable distance estimate at sample points.

    ``d(a, Psi(e^z))`` must decay, and ``d(theta(z), Phi(z))`` must be
    bounded by ``kappa ||Ad exp(-z R)|| d(a, Psi(e^z))`` with kappa the
    translation constant of the reference metric (at least 1).
    '''
    _single_variable(family, 'distance_chain')
    orbit = orbit or family_orbit(family, dec)
    theta = nilpotent_orbit(orbit)
    psi = untwisted_map(family, dec)
    metric = family.reference_metric()
    moduli = family.coordinates(np.full(family.count, -1.0), w)[1]
    limit = orbit.limit_at(moduli)
    rng = rng or np.random.RandomState(DEFAULT_SEED)
    kappa = translation_lipschitz_constant(family.phd, rng, samples=30, metric=metric)
    rows = []
    terms = []
    for x in xs:
        z = np.full(family.count, complex(x, y))
        near = domain_distance(limit, psi.at_log(z, moduli), metric)
        far = domain_distance(theta(z, moduli), family.period(z, moduli), metric)
        bound = max(kappa, 1.0) * ad_norm(theta.twist_operator(z), metric) * near
        terms.append({'x': x, 'limit_gap': near, 'orbit_gap': far, 'bound': bound})
        rows.append((x, y, 0.0, far))
    nears = [term['limit_gap'] for term in terms]
    if max(nears) <= VANISHING_DISTANCE:
        rate = np.inf
    else:
        usable = [(term['x'], term['limit_gap']) for term in terms if term['limit_gap'] > 0]
        rate = _fit_line([x for x, _ in usable], np.log([d for _, d in usable]))[0] if len(usable) > 1 else np.nan
    bounded = all(term['orbit_gap'] <= term['bound'] * (1 + 1e-6) + VANISHING_DISTANCE for term in terms)
    passed = bounded and (rate > 0)
    return CheckResult('distance_chain', passed, {
        'kappa': kappa,
        'limit_rate': float(rate) if np.isfinite(rate) else None,
        'terms': terms,
    }, rows, 'orbit_gap')


def ad_bound_check(operator, x_range=AD_WINDOW, samples=AD_SAMPLES, metric=None, tolerances=None):
    '''
    Growth of ``||Ad exp(x A)||`` for semisimple A with real eigenvalues
    (exponential in the eigenvalue spread) or nilpotent A (polynomial).

    :raises ContractError: If A is neither.
    '''
    tolerances = merge_tolerances(tolerances)
    operator = as_operator(operator)
    rank = operator.shape[0]
    xs = np.linspace(x_range[0], x_range[1], samples)
    zero = not np.abs(operator).max()
    if not zero and is_nilpotent(operator):
        norms = [ad_norm(matrix_exp(x * operator), metric) for x in xs]
        lo, hi = NILPOTENT_FIT_WINDOW
        fit = [(abs(x), value) for x, value in zip(xs, norms) if lo <= abs(x) <= hi]
        degree = _fit_line(np.log([a for a, _ in fit]), np.log([v for _, v in fit]))[0]
        passed = degree <= 2 * (rank - 1) + tolerances['log_order']
        return CheckResult('ad_bound', passed, {'kind': 'nilpotent', 'degree': degree, 'max_degree': 2 * (rank - 1)},
                           [(x, 0.0, 0.0, v) for x, v in zip(xs, norms)], 'ad_norm')
    eigenvalues = scipy.linalg.eigvals(operator)
    if not is_semisimple(operator) or np.abs(eigenvalues.imag).max() > 1e-9 * max(1.0, np.abs(eigenvalues).max()):
        raise ContractError('ad_bound_check needs a nilpotent or a real semisimple operator')
    spread = float(eigenvalues.real.max() - eigenvalues.real.min())
    ratios = [ad_norm(matrix_exp(x * operator), metric) / np.exp(spread * abs(x)) for x in xs]
    anchor = ad_norm(matrix_exp(-operator), metric) / np.exp(spread)
    bound = tolerances['ad_factor'] * anchor
    passed = max(ratios) <= bound
    return CheckResult('ad_bound', passed, {'kind': 'semisimple', 'spread': spread, 'max_ratio': max(ratios),
                                            'bound': bound}, [(x, 0.0, 0.0, r) for x, r in zip(xs, ratios)],
                       'ad_ratio')


def schmid_growth_check(family, dec=None, x_range=SCHMID_WINDOW, samples=SCHMID_SAMPLES, y=0.0, w=None,
                        tolerances=None, threads=None):
    '''
    Slope of ``log ||Ad g(z)^-1||`` against ``log |Re z|``.

    Along an orbit with ``N^m != 0 = N^(m+1)``, g(z) stretches the extreme
    weight spaces by ``|x|^(m / 2)`` and ``|x|^(-m / 2)``, so the slope must
    be m.

    :param dec: Decomposition of the monodromy; computed with the family's
        window when omitted.
    :type dec: MonodromyDecomposition or None
    '''
    tolerances = merge_tolerances(tolerances)
    _single_variable(family, 'schmid_growth_check')
    if dec is None:
        dec = decompose(family.monodromy, family.alpha)
    expected = max(nilpotency_order(n) for n in dec.nilpotent)
    reference = family.reference_point()
    metric = family.reference_metric()
    moduli = family.coordinates(np.full(family.count, -1.0), w)[1]
    xs = -np.logspace(np.log10(-x_range[1]), np.log10(-x_range[0]), samples)[::-1]

    def value(x):
        g = unitary_translation(reference, family.period(np.full(family.count, complex(x, y)), moduli), family.phd)
        return ad_norm(np.linalg.inv(g), metric)
    norms = evaluate_grid(value, xs, threads)
    slope, _, residual = _fit_line(np.log(np.abs(xs)), np.log(norms))
    passed = bool(np.isfinite(slope)) and abs(slope - expected) <= tolerances['schmid']
    return CheckResult('schmid_growth', passed, {'beta_hat': slope, 'expected': expected, 'residual': residual},
                       [(float(x), y, 0.0, float(v)) for x, v in zip(xs, norms)], 'ad_norm')


def parabolic_weight(family, dec, section, angle=0.0, window=WEIGHT_WINDOW, samples=WEIGHT_SAMPLES, w=None):
    '''
    Estimate the weight of a single-valued section from its Hodge norm along
    a ray ``t_j = r e^{i angle}``.

    :param section: Callable ``z -> vector`` in the flat frame, e.g. an
        entry of :func:`hodgeorbit.monodromy.deligne_frame`.
    :rtype: WeightEstimate
    '''
    radii = np.logspace(np.log10(window[0]), np.log10(window[1]), samples)
    rows = []
    for radius in radii:
        z = _ray_point(family.count, radius, angle)
        rows.append((float(radius), flat_section_norm(family, dec, section, z, w)))
    return WeightEstimate.fit(rows)


def frame_norm_bounds(family, dec, angle=0.0, window=WEIGHT_WINDOW, samples=WEIGHT_SAMPLES, w=None,
                      tolerances=None):
    '''
    Log orders of the rescaled twisted frame: the extreme eigenvalues of its
    Gram matrix against ``L = prod |log |t_j||``, as
    ``lambda_max ~ L^(2M)`` and ``lambda_min ~ L^(-2M')``.
    '''
    tolerances = merge_tolerances(tolerances)
    radii = np.logspace(np.log10(window[0]), np.log10(window[1]), samples)
    logs = []
    upper = []
    lower = []
    for radius in radii:
        z = _ray_point(family.count, radius, angle)
        eigenvalues = scipy.linalg.eigvalsh(twisted_frame_gram(family, dec, z, w))
        logs.append(family.count * np.log(abs(np.log(radius))))
        upper.append(0.5 * np.log(eigenvalues[-1]))
        lower.append(0.5 * np.log(max(eigenvalues[0], TINY)))
    order_up = _fit_line(logs, upper)[0]
    order_down = -_fit_line(logs, lower)[0]
    bound = tolerances['frame_log_order']
    return CheckResult('frame_norm_bounds', order_up <= bound and order_down <= bound,
                       {'log_order_upper': order_up, 'log_order_lower': order_down},
                       [(float(np.log(r)), angle, 0.0, float(np.exp(2 * u))) for r, u in zip(radii, upper)],
                       'gram_max_eigenvalue')


def check_grading(family, dec, w=None, tolerances=None):
    '''
    Ranks of the limit filtration against the Hodge numbers, and parabolic
    weights of every twisted frame entry against its block exponents.
    '''
    tolerances = merge_tolerances(tolerances)
    report = limit_filtration(untwisted_map(family, dec), w)
    ranks = report.ranks
    graded = {p: ranks[p] - ranks.get(p + 1, 0) for p in ranks}
    ranks_match = all(graded.get(p, 0) == h for p, h in family.phd.hodge_numbers.items())
    weights = []
    rows = []
    passed = ranks_match
    for index, entry in enumerate(deligne_frame(dec)):
        estimate = parabolic_weight(family, dec, entry, w=w)
        rows.extend((float(np.log(radius)), 0.0, 0.0, float(norm)) for radius, norm in estimate.samples)
        expected = float(np.sum(entry.betas))
        matched = abs(estimate.beta_hat - expected) <= tolerances['weight']
        passed = passed and matched
        weights.append(dict(estimate.to_dict(), entry=index, block=entry.block, expected=expected))
    return CheckResult('grading', passed, {
        'graded_ranks': {str(p): rank for p, rank in graded.items()},
        'ranks_match': ranks_match,
        'weights': weights,
    }, rows, 'section_norm')


def higgs_boundedness(family, x_range=HIGGS_WINDOW, samples=HIGGS_SAMPLES, y=0.0, w=None, tolerances=None,
                      threads=None):
    '''
    The Higgs norm along a ray stays below ``higgs_factor`` times its value
    at the start of the window; the z and t coordinate computations are
    compared at that point.
    '''
    tolerances = merge_tolerances(tolerances)
    moduli = family.coordinates(np.full(family.count, -1.0), w)[1]
    xs = np.linspace(x_range[1], x_range[0], samples)

    def value(x):
        return higgs_norm(family, np.full(family.count, complex(x, y)), moduli)
    norms = evaluate_grid(value, xs, threads)
    start = norms[0]
    in_t = higgs_norm(family, np.full(family.count, complex(xs[0], y)), moduli, coordinates='t')
    agreement = abs(in_t - start) / max(start, 1.0)
    bounded = max(norms) <= tolerances['higgs_factor'] * start + VANISHING_DISTANCE
    passed = bounded and agreement <= tolerances['coordinate_agreement']
    return CheckResult('higgs_boundedness', passed, {
        'start': start,
        'maximum': max(norms),
        'coordinate_agreement': agreement,
    }, [(float(x), y, 0.0, float(v)) for x, v in zip(xs, norms)], 'higgs_norm')


def splitting_property(seed=DEFAULT_SEED, trials=SPLITTING_TRIALS, max_dim=8, max_count=3, tolerances=None):
    '''
    Decompose random commuting unitary-similar tuples and check reassembly,
    commutators, windows, the window shift and frame single-valuedness.
    '''
    tolerances = merge_tolerances(tolerances)
    rng = np.random.RandomState(seed)
    failures = []
    worst = {'reassembly': 0.0, 'commutator': 0.0, 'shift': 0.0, 'single_valued': 0.0}
    for trial in range(trials):
        dim = int(rng.randint(1, max_dim + 1))
        count = int(rng.randint(1, max_count + 1))
        operators = random_unitary_similar_tuple(rng, dim, count)
        alpha = rng.uniform(-1.0, 1.0, count)
        try:
            monodromy = MonodromyTuple(operators)
            dec = decompose(monodromy, alpha)
            shifted = decompose(monodromy, alpha + 1)
        except (ContractError, ConvergenceError) as err:
            failures.append({'trial': trial, 'error': str(err)})
            continue
        result = check_splitting(monodromy, dec, tolerances)
        shift = max(max(float(np.abs(s2 - s1 - np.eye(dim)).max()), float(np.abs(n2 - n1).max()))
                    for s1, s2, n1, n2 in zip(dec.semisimple, shifted.semisimple, dec.nilpotent, shifted.nilpotent))
        z = rng.uniform(-5, -1, count) + 1j * rng.uniform(-np.pi, np.pi, count)
        single = max(shift_residual(entry, z, monodromy) for entry in deligne_frame(dec))
        worst['reassembly'] = max(worst['reassembly'], result.details['reassembly'])
        worst['commutator'] = max(worst['commutator'], result.details['commutator'])
        worst['shift'] = max(worst['shift'], shift)
        worst['single_valued'] = max(worst['single_valued'], single)
        if not result.passed or shift > tolerances['window_shift'] or single > tolerances['single_valued']:
            failures.append({'trial': trial, 'dim': dim, 'count': count, 'reassembly': result.details['reassembly'],
                             'shift': shift, 'single_valued': single})
    return CheckResult('splitting_property', not failures, dict(worst, trials=trials, seed=seed,
                                                                failures=failures))


class SuiteReport(object):
    '''
    All checks run on one family.
    '''
    def __init__(self, family, alpha, seed, checks):
        self.family = family
        self.alpha = alpha
        self.seed = seed
        self.checks = checks

    def __repr__(self):
        return '%s(%r, passed=%s)' % (self.__class__.__name__, self.family, self.passed)

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def to_dict(self):
        return {
            'family': self.family,
            'alpha': list(self.alpha),
            'seed': self.seed,
            'passed': self.passed,
            'checks': [check.to_dict() for check in self.checks],
        }


def _log_result(result):
    if result.passed:
        LOGGER.info('Check %s passed', result.name)
    else:
        LOGGER.error('Check %s failed: %s', result.name, result.details)
    return result


def run_suite(family, alpha=None, seed=DEFAULT_SEED, tolerances=None, threads=None, trials=SPLITTING_TRIALS):
    '''
    Run every check on ``family``.

    :param alpha: Window, defaulting to the family's.
    :rtype: SuiteReport
    '''
    tolerances = merge_tolerances(tolerances)
    alpha = family.alpha if alpha is None else np.atleast_1d(np.asarray(alpha, dtype=float))
    dec = decompose(family.monodromy, alpha)
    orbit = family_orbit(family, dec)
    rng = np.random.RandomState(seed)
    checks = []

    def add(result):
        checks.append(_log_result(result))
        return result

    add(check_splitting(family.monodromy, dec, tolerances))
    add(check_single_valuedness(family, dec, tolerances))
    add(check_dual(family.monodromy, dec, tolerances))
    add(check_extension(family, dec, tolerances=tolerances))
    add(check_family_horizontality(family, rng, tolerances=tolerances))
    add(check_orbit_horizontality(orbit, tolerances=tolerances))
    if family.count == 1:
        add(orbit_threshold(orbit, family.phd, tolerances=tolerances))
        add(distance_decay(family, dec, orbit, tolerances=tolerances, threads=threads)[0])
        add(periodic_reduction(family, dec, orbit, tolerances=tolerances))
        add(distance_chain(family, dec, orbit, rng=rng, tolerances=tolerances))
        add(schmid_growth_check(family, dec, tolerances=tolerances, threads=threads))
    metric = family.reference_metric()
    for s, n in zip(dec.semisimple, dec.nilpotent):
        add(ad_bound_check(s, metric=metric, tolerances=tolerances))
        add(ad_bound_check(n, metric=metric, tolerances=tolerances))
    add(check_grading(family, dec, tolerances=tolerances))
    add(frame_norm_bounds(family, dec, tolerances=tolerances))
    add(higgs_boundedness(family, tolerances=tolerances, threads=threads))
    add(splitting_property(seed, trials=trials, tolerances=tolerances))
    report = SuiteReport(family.name, alpha.tolist(), seed, checks)
    LOGGER.info('Suite on %s: %d of %d checks passed', family.name, sum(c.passed for c in checks), len(checks))
    return report
