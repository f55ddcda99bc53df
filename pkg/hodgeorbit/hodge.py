'''
Polarized Hodge structures, the compact dual and the period domain.

The polarization is a hermitian matrix ``Q`` with ``Q(u, v) = v^H Q u``. A
Hodge structure of weight ``m`` is polarized when ``(-1)^q Q`` is positive
definite on every ``V^{p,q}``; filtrations are stored step by step as
``F^p`` subspaces so that horizontality and membership tests are direct.
'''
import logging

import numpy as np
import scipy.linalg

from sortedcontainers import SortedDict

from hodgeorbit.numlin import (
    ContractError,
    Subspace,
    ad_norm,
    as_columns,
    as_operator,
    gap_distance,
    matrix_from_json,
    matrix_to_json,
    operator_from_json,
    operator_to_json,
    orthonormalize,
    random_invertible,
    zero_subspace,
)

LOGGER = logging.getLogger(__name__)

POSITIVITY_MARGIN = 1e-10
HERMITIAN_TOLERANCE = 1e-12
HORIZONTAL_TOLERANCE = 1e-8
NESTING_TOLERANCE = 1e-8
ORTHOGONALITY_TOLERANCE = 1e-8
SPLIT_TOLERANCE = 1e-10
# g(z) with a larger condition number is refused.
CONDITION_LIMIT = 1e12


def _sign(weight, p):
    return 1.0 if (weight - p) % 2 == 0 else -1.0


class PolarizedHodgeData(object):
    '''
    Weight, Hodge numbers and polarization of a polarized Hodge structure.

    :ivar weight: The weight m.
    :ivar hodge_numbers: SortedDict p -> h^{p,m-p}.
    :ivar polarization: The hermitian matrix Q.
    '''
    def __init__(self, weight, hodge_numbers, polarization):
        self.weight = int(weight)
        numbers = SortedDict()
        for p, h in dict(hodge_numbers).items():
            if int(h) < 0:
                raise ContractError('Hodge number h^{%s} is negative' % p)
            numbers[int(p)] = int(h)
        nonzero = [p for p, h in numbers.items() if h]
        if not nonzero:
            raise ContractError('Hodge numbers are all zero')
        # Zero entries outside the occupied range carry no information.
        self.hodge_numbers = SortedDict((p, numbers.get(p, 0)) for p in range(nonzero[0], nonzero[-1] + 1))
        self.polarization = as_operator(polarization)
        rank = sum(self.hodge_numbers.values())
        if self.polarization.shape[0] != rank:
            raise ContractError('polarization is %dx%d but the Hodge numbers sum to %d'
                                % (self.polarization.shape + (rank,)))
        q = self.polarization
        asymmetry = np.abs(q - q.conj().T).max()
        if asymmetry > HERMITIAN_TOLERANCE * max(1.0, np.abs(q).max()):
            raise ContractError('polarization is not hermitian', residual=float(asymmetry))
        eigenvalues = scipy.linalg.eigvalsh((q + q.conj().T) / 2)
        if np.abs(eigenvalues).min() <= HERMITIAN_TOLERANCE * np.abs(eigenvalues).max():
            raise ContractError('polarization is degenerate')
        signature = (int(np.sum(eigenvalues > 0)), int(np.sum(eigenvalues < 0)))
        if signature != self.signature:
            raise ContractError('polarization has signature %s, the Hodge numbers require %s'
                                % (signature, self.signature))

    def __repr__(self):
        return '%s(weight=%d, hodge_numbers=%s)' % (self.__class__.__name__, self.weight,
                                                    dict(self.hodge_numbers))

    @property
    def rank(self):
        return self.polarization.shape[0]

    @property
    def p_min(self):
        return self.hodge_numbers.keys()[0]

    @property
    def p_max(self):
        return self.hodge_numbers.keys()[-1]

    @property
    def signature(self):
        '''
        Expected inertia (positive, negative) of Q.
        '''
        positive = sum(h for p, h in self.hodge_numbers.items() if _sign(self.weight, p) > 0)
        return positive, self.rank - positive

    def sign(self, p):
        '''
        ``(-1)^q`` for ``q = m - p``.
        '''
        return _sign(self.weight, p)

    def filtration_dims(self):
        '''
        SortedDict p -> f^p = sum of h^{i,m-i} for i >= p.
        '''
        dims = SortedDict()
        total = 0
        for p in reversed(self.hodge_numbers.keys()):
            total += self.hodge_numbers[p]
            dims[p] = total
        return dims

    def direct_sum(self, other):
        if self.weight != other.weight:
            raise ContractError('cannot add Hodge structures of weights %d and %d' % (self.weight, other.weight))
        numbers = dict(self.hodge_numbers)
        for p, h in other.hodge_numbers.items():
            numbers[p] = numbers.get(p, 0) + h
        return PolarizedHodgeData(self.weight, numbers,
                                  scipy.linalg.block_diag(self.polarization, other.polarization))

    def tensor_product(self, other):
        numbers = {}
        for a, h in self.hodge_numbers.items():
            for b, k in other.hodge_numbers.items():
                numbers[a + b] = numbers.get(a + b, 0) + h * k
        return PolarizedHodgeData(self.weight + other.weight, numbers,
                                  np.kron(self.polarization, other.polarization))

    def to_json(self):
        return {
            'weight': self.weight,
            'hodge_numbers': {str(p): h for p, h in self.hodge_numbers.items()},
            'polarization': operator_to_json(self.polarization),
        }

    @classmethod
    def from_json(cls, obj):
        try:
            return cls(obj['weight'], {int(p): h for p, h in obj['hodge_numbers'].items()},
                       operator_from_json(obj['polarization']))
        except (KeyError, TypeError, AttributeError) as err:
            raise ContractError('invalid polarized Hodge data JSON: %s' % err)


class FlagPoint(object):
    '''
    A decreasing filtration ``F^{p_max} <= ... <= F^{p_min} = C^r``, i.e. a
    point of the compact dual.

    :ivar steps: SortedDict p -> Subspace F^p.
    '''
    def __init__(self, steps, check=True):
        self.steps = SortedDict((int(p), space) for p, space in dict(steps).items())
        if not self.steps:
            raise ContractError('a flag needs at least one step')
        keys = list(self.steps.keys())
        if keys != list(range(keys[0], keys[-1] + 1)):
            raise ContractError('flag steps must be indexed by consecutive integers, got %s' % keys)
        dims = [space.ambient_dim for space in self.steps.values()]
        if len(set(dims)) != 1:
            raise ContractError('flag steps live in different ambient spaces')
        if check:
            lowest = self.steps[keys[0]]
            if lowest.dim != lowest.ambient_dim:
                raise ContractError('lowest step F^%d must be the whole space' % keys[0])
            for p in keys[1:]:
                residual = self.steps[p - 1].residual(self.steps[p].basis) if self.steps[p].dim else 0.0
                if self.steps[p].dim > self.steps[p - 1].dim or residual > NESTING_TOLERANCE:
                    raise ContractError('F^%d is not contained in F^%d' % (p, p - 1), residual=residual)

    def __repr__(self):
        return '%s(dims=%s)' % (self.__class__.__name__, dict(self.dims()))

    @classmethod
    def from_bases(cls, bases, metric=None):
        '''
        Build a flag from spanning vectors of every step.

        :param bases: Mapping p -> vectors spanning F^p.
        :type bases: dict
        '''
        return cls({p: orthonormalize(vectors, metric) for p, vectors in dict(bases).items()})

    @property
    def ambient_dim(self):
        return self.steps.values()[0].ambient_dim

    @property
    def p_min(self):
        return self.steps.keys()[0]

    @property
    def p_max(self):
        return self.steps.keys()[-1]

    @property
    def metric(self):
        return self.steps.values()[0].metric

    def step(self, p):
        '''
        F^p for any integer p; zero above ``p_max`` and everything below
        ``p_min``.
        '''
        if p > self.p_max:
            return zero_subspace(self.ambient_dim, self.metric)
        if p < self.p_min:
            return self.steps[self.p_min]
        return self.steps[p]

    def dims(self):
        return SortedDict((p, space.dim) for p, space in self.steps.items())

    def check_dims(self, phd):
        '''
        :raises ContractError: If the dimension vector differs from the one
            of ``phd``.
        '''
        expected = phd.filtration_dims()
        if self.ambient_dim != phd.rank or dict(self.dims()) != dict(expected):
            raise ContractError('flag has dimensions %s, expected %s' % (dict(self.dims()), dict(expected)))

    def to_json(self):
        return {'steps': {str(p): matrix_to_json(space.basis) for p, space in self.steps.items()}}

    @classmethod
    def from_json(cls, obj, metric=None):
        try:
            return cls.from_bases({int(p): matrix_from_json(basis) for p, basis in obj['steps'].items()}, metric)
        except (KeyError, TypeError, AttributeError) as err:
            raise ContractError('invalid flag JSON: %s' % err)


class HodgeDecomposition(object):
    '''
    The pieces ``V^{p,m-p}`` of a Hodge decomposition, keyed by p.
    '''
    def __init__(self, pieces, weight):
        self.pieces = SortedDict((int(p), space) for p, space in dict(pieces).items())
        self.weight = int(weight)
        self._projectors = None

    def __repr__(self):
        return '%s(weight=%d, dims=%s)' % (self.__class__.__name__, self.weight,
                                           {p: space.dim for p, space in self.pieces.items()})

    @property
    def ambient_dim(self):
        return self.pieces.values()[0].ambient_dim

    def basis(self):
        '''
        Piece bases side by side, highest p first.
        '''
        columns = [self.pieces[p].basis for p in reversed(self.pieces.keys())]
        return np.hstack(columns)

    def projectors(self):
        '''
        SortedDict p -> projector onto V^{p,m-p} along the other pieces.
        '''
        if self._projectors is None:
            basis = self.basis()
            try:
                inverse = np.linalg.inv(basis)
            except np.linalg.LinAlgError:
                raise ContractError('Hodge pieces are not independent')
            projectors = SortedDict()
            start = 0
            for p in reversed(self.pieces.keys()):
                stop = start + self.pieces[p].dim
                projectors[p] = basis[:, start:stop].dot(inverse[start:stop, :])
                start = stop
            self._projectors = projectors
        return self._projectors

    def components(self, vector):
        vector = np.asarray(vector, dtype=complex)
        return SortedDict((p, projector.dot(vector)) for p, projector in self.projectors().items())

    def validate(self, polarization):
        '''
        :raises ContractError: If the pieces do not span, are not Q-orthogonal
            or fail the sign condition.
        '''
        polarization = np.asarray(polarization, dtype=complex)
        basis = self.basis()
        if basis.shape != (self.ambient_dim, self.ambient_dim):
            raise ContractError('Hodge pieces have total dimension %d in C^%d' % (basis.shape[1], self.ambient_dim))
        singular = scipy.linalg.svdvals(basis)
        if singular[-1] <= SPLIT_TOLERANCE * singular[0]:
            raise ContractError('Hodge pieces are not independent', residual=float(singular[-1] / singular[0]))
        keys = list(self.pieces.keys())
        for i, p in enumerate(keys):
            first = self.pieces[p].basis
            for p_other in keys[i + 1:]:
                second = self.pieces[p_other].basis
                if first.shape[1] and second.shape[1]:
                    coupling = np.abs(second.conj().T.dot(polarization).dot(first)).max()
                    if coupling > ORTHOGONALITY_TOLERANCE:
                        raise ContractError('V^%d and V^%d are not Q-orthogonal' % (p, p_other),
                                            residual=float(coupling))
            if first.shape[1]:
                form = _sign(self.weight, p) * first.conj().T.dot(polarization).dot(first)
                margin = scipy.linalg.eigvalsh((form + form.conj().T) / 2).min()
                if margin <= POSITIVITY_MARGIN:
                    raise ContractError('(-1)^q Q is not positive on V^%d' % p, failed_p=p, margin=float(margin))

    def to_json(self):
        return {
            'weight': self.weight,
            'pieces': {str(p): matrix_to_json(space.basis) for p, space in self.pieces.items()},
        }


def hodge_metric(dec, polarization):
    '''
    Hermitian matrix H with ``|v|^2 = v^H H v`` for the Hodge norm of ``dec``.
    '''
    polarization = np.asarray(polarization, dtype=complex)
    metric = np.zeros_like(polarization)
    for p, projector in dec.projectors().items():
        metric += _sign(dec.weight, p) * projector.conj().T.dot(polarization).dot(projector)
    return (metric + metric.conj().T) / 2


def hodge_norm_sq(vector, dec, polarization):
    '''
    Squared Hodge norm ``sum_p (-1)^q Q(v^{p,q}, v^{p,q})``.

    :param vector: Vector of C^r.
    :param dec: A Hodge decomposition polarized by ``polarization``.
    :type dec: HodgeDecomposition
    :rtype: float
    :raises ContractError: If ``dec`` is not polarized by Q.
    '''
    dec.validate(polarization)
    polarization = np.asarray(polarization, dtype=complex)
    total = 0.0
    for p, component in dec.components(vector).items():
        total += _sign(dec.weight, p) * np.vdot(component, polarization.dot(component)).real
    return float(total)


def filtration_from_decomposition(dec):
    '''
    ``F^p`` as the span of all pieces with first index at least p.
    '''
    keys = [p for p, space in dec.pieces.items() if space.dim]
    dim = dec.ambient_dim
    steps = {}
    for p in range(keys[0], keys[-1] + 1):
        columns = [dec.pieces[i].basis for i in dec.pieces.keys() if i >= p and dec.pieces[i].dim]
        steps[p] = orthonormalize(np.hstack(columns)) if columns else zero_subspace(dim)
    return FlagPoint(steps)


class MembershipReport(object):
    '''
    Result of :func:`in_period_domain`; truthy when the flag lies in D.

    :ivar margin: Smallest positivity margin over the pieces which are not
        fixed by the others (all p above the lowest); the lowest piece is the
        Q-orthocomplement of the rest and its sign follows from the
        signature of Q. A flag with a single piece reports its margin
        relative to the size of its frame.
    :ivar margins: p -> smallest eigenvalue of the compressed (-1)^q Q form.
        Membership is decided on this value divided by the squared norm of
        the frame, so frames may be scaled freely.
    :ivar splits: p -> relative smallest singular value of the direct-sum
        split of F^p.
    :ivar failed_p: First p (from the top) which failed, or None.
    '''
    def __init__(self, member, margin, margins, splits, failed_p=None):
        self.member = bool(member)
        self.margin = float(margin)
        self.margins = margins
        self.splits = splits
        self.failed_p = failed_p

    def __bool__(self):
        return self.member

    def __repr__(self):
        return '%s(member=%s, margin=%.6g, failed_p=%s)' % (self.__class__.__name__, self.member, self.margin,
                                                            self.failed_p)

    def to_dict(self):
        return {
            'member': self.member,
            'margin': self.margin,
            'failed_p': self.failed_p,
            'margins': {str(p): value for p, value in self.margins.items()},
            'splits': {str(p): value for p, value in self.splits.items()},
        }


def _pieces(flag_bases, phd):
    '''
    Yield p, piece vectors, direct-sum quality, positivity margin and the
    margin relative to the squared norm of the piece vectors, for each
    nonempty piece, highest p first.
    '''
    polarization = phd.polarization
    for p in reversed(phd.hodge_numbers.keys()):
        h = phd.hodge_numbers[p]
        if not h:
            continue
        current = flag_bases(p)
        above = flag_bases(p + 1)
        if above.shape[1]:
            kernel = scipy.linalg.null_space(above.conj().T.dot(polarization).dot(current), rcond=1e-10)
        else:
            kernel = np.eye(current.shape[1], dtype=complex)
        if kernel.shape[1] != h:
            yield p, None, 0.0, 0.0, 0.0
            continue
        vectors = current.dot(kernel)
        combined = np.hstack([vectors, above])
        lengths = np.linalg.norm(combined, axis=0)
        singular = scipy.linalg.svdvals(combined / np.where(lengths > 0, lengths, 1.0))
        split = float(singular[-1] / singular[0]) if singular[0] > 0 else 0.0
        form = phd.sign(p) * vectors.conj().T.dot(polarization).dot(vectors)
        margin = float(scipy.linalg.eigvalsh((form + form.conj().T) / 2).min())
        scale = float(scipy.linalg.norm(vectors, 2) ** 2 * scipy.linalg.norm(polarization, 2))
        yield p, vectors, split, margin, margin / scale if scale > 0 else 0.0


def in_period_domain(flag, phd, frames=None):
    '''
    Test whether a flag lies in the period domain D.

    For every p the Q-orthocomplement ``F^p & (F^{p+1})^Q`` must split F^p
    and carry a positive definite ``(-1)^q Q``.

    :param flag: Point of the compact dual.
    :type flag: FlagPoint
    :param phd: Hodge numbers and polarization.
    :type phd: PolarizedHodgeData
    :param frames: Optional mapping p -> matrix spanning F^p; margins are then
        measured in these frames instead of orthonormal ones.
    :type frames: dict or None
    :rtype: MembershipReport
    :raises ContractError: If the dimension vector does not match.
    '''
    flag.check_dims(phd)

    def flag_bases(p):
        if frames is not None and p in frames:
            return as_columns(frames[p])
        return np.asarray(flag.step(p).basis)

    margins = SortedDict()
    relative = SortedDict()
    splits = SortedDict()
    failed_p = None
    for p, vectors, split, margin, scaled in _pieces(flag_bases, phd):
        margins[p] = margin
        relative[p] = scaled
        splits[p] = split
        if failed_p is None and (vectors is None or split <= SPLIT_TOLERANCE or scaled <= POSITIVITY_MARGIN):
            failed_p = p
    upper = [margins[p] for p in margins.keys() if p > margins.keys()[0]] or list(relative.values())
    return MembershipReport(failed_p is None, min(upper), margins, splits, failed_p)


def decomposition_from_filtration(flag, phd):
    '''
    Hodge decomposition ``V^{p,m-p} = F^p & (F^{p+1})^Q`` of a flag in D.

    :raises ContractError: If the flag is outside D; the error carries
        ``failed_p`` and ``margin``.
    '''
    report = in_period_domain(flag, phd)
    if not report:
        raise ContractError('flag is not in the period domain (p=%s, margin %.3g)'
                            % (report.failed_p, report.margins.get(report.failed_p, 0.0)),
                            failed_p=report.failed_p, margin=report.margins.get(report.failed_p, 0.0))
    dim = phd.rank
    pieces = {p: zero_subspace(dim) for p in phd.hodge_numbers.keys()}
    for p, vectors, _, _, _ in _pieces(lambda p: np.asarray(flag.step(p).basis), phd):
        pieces[p] = orthonormalize(vectors)
    return HodgeDecomposition(pieces, phd.weight)


def is_horizontal(operator, flag, tol=HORIZONTAL_TOLERANCE):
    '''
    Test ``A(F^p) <= F^{p-1}`` for all p.

    :returns: (horizontal, residual) where residual is the largest norm of
        the part of ``A F^p`` outside ``F^{p-1}``.
    :rtype: tuple
    '''
    operator = np.asarray(operator, dtype=complex)
    residual = 0.0
    for p in flag.steps.keys():
        if p - 1 < flag.p_min or not flag.steps[p].dim:
            continue
        residual = max(residual, flag.step(p - 1).residual(operator.dot(flag.steps[p].basis)))
    return residual <= tol, residual


def domain_distance(first, second, metric=None):
    '''
    ``max_p gap(F1^p, F2^p)`` in the inner product ``metric``, normally the
    Hodge metric of a reference point (see :func:`reference_metric`).
    '''
    if dict(first.dims()) != dict(second.dims()):
        raise ContractError('flags have different dimension vectors')
    distance = 0.0
    for p in first.steps.keys():
        distance = max(distance, gap_distance(first.steps[p], second.steps[p], metric))
    return distance


def left_translate(g, flag):
    '''
    The flag ``g F``, re-orthonormalized step by step.

    :raises ContractError: If g is singular.
    '''
    g = as_operator(g)
    singular = scipy.linalg.svdvals(g)
    if singular[-1] <= 1e-14 * singular[0]:
        raise ContractError('cannot translate by a singular operator')
    metric = flag.metric
    steps = {}
    for p, space in flag.steps.items():
        steps[p] = orthonormalize(g.dot(space.basis), metric) if space.dim else space
    return FlagPoint(steps, check=False)


def reference_point(phd):
    '''
    A point o of D built from an eigenbasis of Q: positive eigenvectors fill
    the pieces with even q, negative ones those with odd q, highest p first.
    '''
    eigenvalues, vectors = scipy.linalg.eigh(phd.polarization)
    positive = [vectors[:, i] for i in reversed(range(len(eigenvalues))) if eigenvalues[i] > 0]
    negative = [vectors[:, i] for i in range(len(eigenvalues)) if eigenvalues[i] < 0]
    pieces = {}
    for p in reversed(phd.hodge_numbers.keys()):
        h = phd.hodge_numbers[p]
        pool = positive if phd.sign(p) > 0 else negative
        chosen, pool[:] = pool[:h], pool[h:]
        pieces[p] = Subspace(np.column_stack(chosen), check=False) if chosen else zero_subspace(phd.rank)
    return filtration_from_decomposition(HodgeDecomposition(pieces, phd.weight))


def reference_metric(phd, reference=None):
    '''
    Hodge metric of ``reference`` (default :func:`reference_point`).
    '''
    if reference is None:
        reference = reference_point(phd)
    return hodge_metric(decomposition_from_filtration(reference, phd), phd.polarization)


def hodge_frame(flag, phd):
    '''
    Basis E of C^r adapted to the Hodge decomposition of ``flag`` with
    ``E^H Q E = diag((-1)^q)``, highest p first.

    :raises ContractError: If the flag is outside D.
    '''
    dec = decomposition_from_filtration(flag, phd)
    columns = []
    for p in reversed(dec.pieces.keys()):
        vectors = dec.pieces[p].basis
        if not vectors.shape[1]:
            continue
        form = phd.sign(p) * vectors.conj().T.dot(phd.polarization).dot(vectors)
        lower = scipy.linalg.cholesky((form + form.conj().T) / 2, lower=True)
        columns.append(scipy.linalg.solve_triangular(lower, vectors.conj().T, lower=True).conj().T)
    return np.hstack(columns)


def unitary_translation(source, target, phd):
    '''
    A Q-unitary g with ``g source = target`` mapping Hodge frames to Hodge
    frames.

    :raises ContractError: If either flag is outside D or g is too badly
        conditioned; the error carries ``condition``.
    '''
    source_frame = hodge_frame(source, phd)
    target_frame = hodge_frame(target, phd)
    g = target_frame.dot(np.linalg.inv(source_frame))
    condition = np.linalg.cond(g)
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise ContractError('translation is ill-conditioned (%.3g)' % condition, condition=float(condition))
    if condition > 1e8:
        LOGGER.warning('Translation to the target flag has condition number %.3g', condition)
    return as_operator(g)


def random_group_element(phd, rng, scale=1.0):
    '''
    ``exp`` of a random element of the Lie algebra of ``U(Q)``.

    :type rng: np.random.RandomState
    '''
    frame = hodge_frame(reference_point(phd), phd)
    signs = np.real(np.diag(frame.conj().T.dot(phd.polarization).dot(frame))).round()
    noise = rng.standard_normal((phd.rank, phd.rank)) + 1j * rng.standard_normal((phd.rank, phd.rank))
    skew = scale * (noise - noise.conj().T) / (2 * np.sqrt(phd.rank))
    unitary = scipy.linalg.expm(np.diag(signs).dot(skew))
    return as_operator(frame.dot(unitary).dot(np.linalg.inv(frame)))


def random_flag(phd, rng, metric=None):
    '''
    A random point of the compact dual with the dimension vector of ``phd``.
    '''
    basis = random_invertible(rng, phd.rank, spread=2.0)
    return FlagPoint.from_bases({p: basis[:, :dim] if dim else np.zeros((phd.rank, 0))
                                 for p, dim in phd.filtration_dims().items()}, metric)


def translation_lipschitz_constant(phd, rng, samples=50, metric=None, step=1e-3):
    '''
    Largest observed ``d(gF1, gF2) / (||Ad g|| d(F1, F2))`` over random
    invertible g and nearby random flags.
    '''
    worst = 0.0
    for _ in range(samples):
        g = random_invertible(rng, phd.rank, spread=1.5)
        first = random_flag(phd, rng, metric)
        second = left_translate(np.eye(phd.rank) + step * random_invertible(rng, phd.rank, spread=1.0), first)
        distance = domain_distance(first, second, metric)
        if distance <= 0:
            continue
        ratio = domain_distance(left_translate(g, first), left_translate(g, second), metric) / (
            ad_norm(g, metric) * distance)
        worst = max(worst, ratio)
    LOGGER.debug('Translation Lipschitz constant estimate %.6g over %d samples', worst, samples)
    return worst


def flag_direct_sum(first, second):
    keys = range(min(first.p_min, second.p_min), max(first.p_max, second.p_max) + 1)
    return FlagPoint({p: Subspace(scipy.linalg.block_diag(first.step(p).basis, second.step(p).basis), check=False)
                      for p in keys})


def flag_tensor_product(first, second):
    dim = first.ambient_dim * second.ambient_dim
    steps = {}
    for p in range(first.p_min + second.p_min, first.p_max + second.p_max + 1):
        columns = [np.kron(first.step(a).basis, second.step(p - a).basis)
                   for a in range(first.p_min, first.p_max + 1)
                   if first.step(a).dim and second.step(p - a).dim]
        steps[p] = orthonormalize(np.hstack(columns)) if columns else zero_subspace(dim)
    return FlagPoint(steps)
