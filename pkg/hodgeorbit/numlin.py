'''
Dense complex linear algebra shared by the rest of the package.

Operators are plain read-only ``numpy`` arrays of ``complex`` dtype; subspaces
are stored by a basis which is orthonormal for a declared hermitian inner
product. Eigenstructure is obtained from the complex Schur form provided by
``scipy.linalg``.
'''
import logging

import numpy as np
import scipy.linalg

LOGGER = logging.getLogger(__name__)

CLUSTER_TOLERANCE = 1e-8
RANK_TOLERANCE = 1e-10
COMMUTATOR_TOLERANCE = 1e-10
ORTHONORMAL_TOLERANCE = 1e-10
INVARIANCE_TOLERANCE = 1e-8
SCHUR_TOLERANCE = 1e-8
UNIPOTENT_TOLERANCE = 1e-10
MAX_DIMENSION = 64
# Rounding scatters a defective eigenvalue of multiplicity k by about (DEFECT_FACTOR * eps) ** (1 / k).
DEFECT_FACTOR = 100.0
# Above this dimension the r**2 x r**2 conjugation matrix is not formed.
KRONECKER_LIMIT = 16

EPS = np.finfo(float).eps
TINY = np.finfo(float).tiny


class ContractError(ValueError):
    '''
    Raised when the input of an operation violates its contract.

    Keyword arguments are stored as attributes, e.g. ``residual``,
    ``failed_p``, ``margin``, ``point`` or ``condition``.
    '''
    def __init__(self, message, **details):
        super(ContractError, self).__init__(message)
        self.details = details
        for key, value in details.items():
            setattr(self, key, value)


class ConvergenceError(np.linalg.LinAlgError):
    '''
    Raised when an eigenvalue iteration fails or its result does not
    reproduce the input.
    '''
    def __init__(self, message, residual=None):
        super(ConvergenceError, self).__init__(message)
        self.residual = residual


class VerificationError(Exception):
    '''
    Raised when a numerical check contradicts an asymptotic statement, for
    instance a limit sequence which is not Cauchy.
    '''
    def __init__(self, message, report=None):
        super(VerificationError, self).__init__(message)
        self.report = report


def _readonly(array):
    array.setflags(write=False)
    return array


def as_operator(entries):
    '''
    Validate and copy a square complex matrix.

    :param entries: Square array-like of numbers.
    :returns: Read-only complex array.
    :rtype: np.ndarray
    :raises ContractError: If the input is not square, empty, too large or
        contains NaN/Inf values.
    '''
    operator = np.array(entries, dtype=complex)
    if operator.ndim != 2 or operator.shape[0] != operator.shape[1] or not operator.shape[0]:
        raise ContractError('operator must be a non-empty square matrix, got shape %s' % (operator.shape,))
    if operator.shape[0] > MAX_DIMENSION:
        raise ContractError('operator dimension %d exceeds %d' % (operator.shape[0], MAX_DIMENSION))
    if not np.all(np.isfinite(operator)):
        raise ContractError('operator has non-finite entries')
    return _readonly(operator)


def as_columns(vectors):
    '''
    Stack vectors as the columns of a complex matrix.

    A list or tuple is read as a sequence of vectors, a 1-D array as a single
    vector and a 2-D array as columns.
    '''
    if isinstance(vectors, (list, tuple)):
        if not vectors:
            raise ContractError('no vectors given')
        columns = np.column_stack([np.asarray(v, dtype=complex).ravel() for v in vectors])
    else:
        columns = np.array(vectors, dtype=complex)
        if columns.ndim == 1:
            columns = columns[:, np.newaxis]
    if columns.ndim != 2 or not columns.shape[0]:
        raise ContractError('vectors must form a 2-D array, got shape %s' % (columns.shape,))
    if not np.all(np.isfinite(columns)):
        raise ContractError('vectors have non-finite entries')
    return columns


def metric_factor(metric, dim):
    '''
    Return W with ``metric = W^H W`` (upper triangular Cholesky factor).

    :param metric: Hermitian positive definite matrix or None for the
        standard inner product.
    :type metric: np.ndarray or None
    :param dim: Ambient dimension.
    :type dim: int
    :raises ContractError: If the metric is not hermitian positive definite.
    '''
    if metric is None:
        return np.eye(dim, dtype=complex)
    metric = np.asarray(metric, dtype=complex)
    if metric.shape != (dim, dim):
        raise ContractError('inner product has shape %s, expected %s' % (metric.shape, (dim, dim)))
    asymmetry = np.abs(metric - metric.conj().T).max()
    if asymmetry > 1e-10 * max(np.abs(metric).max(), TINY):
        raise ContractError('inner product is not hermitian', residual=asymmetry)
    try:
        lower = scipy.linalg.cholesky((metric + metric.conj().T) / 2, lower=True)
    except np.linalg.LinAlgError:
        raise ContractError('inner product is not positive definite')
    return lower.conj().T


class Subspace(object):
    '''
    A subspace of C^r given by a basis orthonormal for ``metric``.
    '''
    def __init__(self, basis, metric=None, check=True):
        basis = np.array(basis, dtype=complex)
        if basis.ndim == 1:
            basis = basis[:, np.newaxis]
        if basis.ndim != 2 or not basis.shape[0]:
            raise ContractError('basis must be an r x k array, got shape %s' % (basis.shape,))
        self.basis = _readonly(basis)
        self.metric = None if metric is None else _readonly(np.array(metric, dtype=complex))
        if check and self.dim:
            residual = np.abs(self.gram() - np.eye(self.dim)).max()
            if residual > ORTHONORMAL_TOLERANCE:
                raise ContractError('basis is not orthonormal', residual=residual)

    def __repr__(self):
        return '%s(dim=%d, ambient_dim=%d)' % (self.__class__.__name__, self.dim, self.ambient_dim)

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    def _metric_matrix(self):
        if self.metric is None:
            return np.eye(self.ambient_dim, dtype=complex)
        return self.metric

    def gram(self):
        return self.basis.conj().T.dot(self._metric_matrix()).dot(self.basis)

    def projector(self):
        '''
        Orthogonal projector onto the subspace for the stored metric.
        '''
        return self.basis.dot(self.basis.conj().T).dot(self._metric_matrix())

    def residual(self, vectors):
        '''
        Norm (in the stored metric) of the part of ``vectors`` outside the
        subspace, as a largest singular value.
        '''
        vectors = as_columns(vectors)
        outside = vectors - self.projector().dot(vectors)
        weighted = metric_factor(self.metric, self.ambient_dim).dot(outside)
        if not weighted.size:
            return 0.0
        return float(scipy.linalg.norm(weighted, 2))

    def to_json(self):
        return {'basis': matrix_to_json(self.basis)}


def zero_subspace(dim, metric=None):
    return Subspace(np.zeros((dim, 0), dtype=complex), metric, check=False)


def whole_space(dim, metric=None):
    return Subspace(scipy.linalg.solve_triangular(metric_factor(metric, dim), np.eye(dim)), metric, check=False)


def orthonormalize(vectors, metric=None, rtol=RANK_TOLERANCE):
    '''
    Orthonormal basis of the span of ``vectors`` for the inner product
    ``metric``.

    The numerical rank counts singular values above ``rtol`` times the
    largest one. For independent input the basis agrees with Gram-Schmidt
    applied in order of decreasing vector norm.

    :param vectors: Vectors as a sequence or as the columns of an array.
    :param metric: Hermitian positive definite matrix, or None.
    :type metric: np.ndarray or None
    :rtype: Subspace
    :raises ContractError: If the inner product is indefinite.
    '''
    columns = as_columns(vectors)
    dim = columns.shape[0]
    factor = metric_factor(metric, dim)
    weighted = factor.dot(columns)
    if not weighted.shape[1]:
        return zero_subspace(dim, metric)
    singular = scipy.linalg.svdvals(weighted)
    rank = int(np.sum(singular > rtol * singular[0])) if singular[0] > 0 else 0
    q, r, _ = scipy.linalg.qr(weighted, mode='economic', pivoting=True)
    diagonal = np.diag(r)[:rank]
    magnitude = np.abs(diagonal)
    phases = np.ones(rank, dtype=complex)
    nonzero = magnitude > 0
    phases[nonzero] = diagonal[nonzero] / magnitude[nonzero]
    q = q[:, :rank] * phases
    if metric is not None:
        q = scipy.linalg.solve_triangular(factor, q)
    return Subspace(q, metric, check=False)


def gap_distance(first, second, metric=None):
    '''
    Largest principal-angle sine between two subspaces of equal dimension.

    :param metric: Inner product for the angles; defaults to the metric
        stored with ``first``.
    :rtype: float
    :raises ContractError: On dimension mismatch.
    '''
    if first.ambient_dim != second.ambient_dim or first.dim != second.dim:
        raise ContractError('cannot compare a %d-dimensional subspace of C^%d with a %d-dimensional subspace of C^%d'
                            % (first.dim, first.ambient_dim, second.dim, second.ambient_dim))
    if not first.dim or first.dim == first.ambient_dim:
        return 0.0
    if metric is None:
        metric = first.metric
    factor = metric_factor(metric, first.ambient_dim)
    angles = scipy.linalg.subspace_angles(factor.dot(first.basis), factor.dot(second.basis))
    return float(min(1.0, np.sin(np.max(angles))))


def commutator_residual(a, b):
    '''
    ``||AB - BA|| / (||A|| ||B||)`` in the spectral norm; zero if either is 0.
    '''
    scale = scipy.linalg.norm(a, 2) * scipy.linalg.norm(b, 2)
    if scale == 0:
        return 0.0
    return float(scipy.linalg.norm(a.dot(b) - b.dot(a), 2) / scale)


def ad_norm(g, metric=None):
    '''
    Operator norm of ``A -> g A g^-1`` on End(C^r).

    End(C^r) carries the Frobenius inner product induced by ``metric``. For
    small r this is the largest singular value of the conjugation matrix
    ``kron(g^-T, g)``; beyond ``KRONECKER_LIMIT`` the equal value
    ``||g|| ||g^-1||`` is used.

    :raises ContractError: If g is singular.
    '''
    g = as_operator(g)
    dim = g.shape[0]
    factor = metric_factor(metric, dim)
    conjugated = factor.dot(g).dot(np.linalg.inv(factor))
    singular = scipy.linalg.svdvals(conjugated)
    if singular[-1] <= dim * EPS * singular[0]:
        raise ContractError('cannot conjugate by a singular operator', condition=np.inf)
    if dim > KRONECKER_LIMIT:
        return float(singular[0] / singular[-1])
    conjugation = np.kron(np.linalg.inv(conjugated).T, conjugated)
    return float(scipy.linalg.svdvals(conjugation)[0])


def matrix_exp(a):
    '''
    Matrix exponential by scaling and squaring.

    :raises FloatingPointError: If the result overflows.
    '''
    a = as_operator(a)
    result = scipy.linalg.expm(a)
    if not np.all(np.isfinite(result)):
        raise FloatingPointError('matrix exponential overflowed for an operator of norm %.3g'
                                 % scipy.linalg.norm(a, 2))
    return _readonly(result)


def log_unipotent(u, tol=UNIPOTENT_TOLERANCE):
    '''
    Logarithm of a unipotent operator as the finite series
    ``sum_{k=1}^{r-1} (-1)^(k+1) (U - I)^k / k``.

    :raises ContractError: If ``U - I`` is not nilpotent; the error carries
        ``||(U - I)^r||`` as ``residual``.
    '''
    u = as_operator(u)
    dim = u.shape[0]
    shifted = u - np.eye(dim)
    residual = scipy.linalg.norm(np.linalg.matrix_power(shifted, dim), 2)
    if residual > tol * max(1.0, scipy.linalg.norm(shifted, 2)) ** dim:
        raise ContractError('operator is not unipotent', residual=float(residual))
    result = np.zeros_like(shifted)
    term = np.eye(dim, dtype=complex)
    for k in range(1, dim):
        term = term.dot(shifted)
        result += (-1) ** (k + 1) * term / k
    return _readonly(result)


def is_nilpotent(n, tol=1e-8):
    n = as_operator(n)
    dim = n.shape[0]
    power = scipy.linalg.norm(np.linalg.matrix_power(n, dim), 2)
    return bool(power <= tol * max(1.0, scipy.linalg.norm(n, 2)) ** dim)


def nilpotency_order(n, tol=1e-8):
    '''
    The largest m with ``N^m != 0``; zero for N = 0.

    :raises ContractError: If N is not nilpotent.
    '''
    n = as_operator(n)
    scale = max(1.0, scipy.linalg.norm(n, 2))
    power = np.eye(n.shape[0], dtype=complex)
    for order in range(n.shape[0] + 1):
        if scipy.linalg.norm(power, 2) <= tol * scale ** order:
            return order - 1
        power = power.dot(n)
    raise ContractError('operator is not nilpotent', residual=float(scipy.linalg.norm(power, 2)))


def is_semisimple(s, tol=1e-8, cluster_tol=CLUSTER_TOLERANCE):
    '''
    True if ``s`` acts as a scalar on each of its generalized eigenspaces.
    '''
    s = as_operator(s)
    scale = max(scipy.linalg.norm(s, 2), 1.0)
    for eigenvalue, space in spectrum(s, cluster_tol=cluster_tol):
        basis = space.basis
        restricted = basis.conj().T.dot(s).dot(basis)
        if scipy.linalg.norm(restricted - eigenvalue * np.eye(space.dim), 2) > tol * scale:
            return False
    return True


def cluster_separation(size, scale, cluster_tol=CLUSTER_TOLERANCE):
    '''
    Distance below which a group of ``size`` eigenvalues is one cluster.
    '''
    return scale * max(cluster_tol, (DEFECT_FACTOR * EPS) ** (1.0 / size))


def _components(values, indices, separation):
    '''
    Single-linkage components of ``values[indices]`` at ``separation``.
    '''
    owner = {index: index for index in indices}

    def root(index):
        while owner[index] != index:
            owner[index] = owner[owner[index]]
            index = owner[index]
        return index

    for position, i in enumerate(indices):
        for j in indices[position + 1:]:
            if abs(values[i] - values[j]) <= separation:
                owner[root(i)] = root(j)
    groups = {}
    for index in indices:
        groups.setdefault(root(index), []).append(index)
    return list(groups.values())


def _cluster(values, scale, cluster_tol):
    '''
    Group eigenvalues which are one defective eigenvalue scattered by rounding.

    Multiplicities are tried from the largest down: at level k the remaining
    values are linked at ``cluster_separation(k)``, and a component is kept
    once it holds at least k values, i.e. once its size justifies the
    separation it was linked at.
    '''
    remaining = list(range(len(values)))
    clusters = []
    for size in range(len(values), 0, -1):
        if not remaining:
            break
        kept = []
        for group in _components(values, remaining, cluster_separation(size, scale, cluster_tol)):
            if len(group) >= size:
                kept.extend(group)
                clusters.append(sorted(group))
        remaining = [index for index in remaining if index not in kept]
    return sorted(clusters)


def _schur(a, sort=None):
    try:
        if sort is None:
            upper, unitary = scipy.linalg.schur(a, output='complex')
            selected = None
        else:
            upper, unitary, selected = scipy.linalg.schur(a, output='complex', sort=sort)
    except np.linalg.LinAlgError as err:
        raise ConvergenceError('Schur iteration failed: %s' % err, residual=float('nan'))
    residual = scipy.linalg.norm(a - unitary.dot(upper).dot(unitary.conj().T), 2) / max(scipy.linalg.norm(a, 2), TINY)
    if residual > SCHUR_TOLERANCE:
        raise ConvergenceError('Schur form does not reproduce the operator', residual=float(residual))
    return upper, unitary, selected


def spectrum(a, cluster_tol=CLUSTER_TOLERANCE):
    '''
    Eigenvalues with their generalized eigenspaces.

    Each eigenvalue is the mean of a cluster of Schur eigenvalues (the trace
    of the restriction divided by its dimension), and its space is the
    invariant subspace of a reordered Schur form. Results are ordered by
    argument, then modulus.

    :param cluster_tol: Relative separation below which eigenvalues merge.
    :type cluster_tol: float
    :returns: List of (eigenvalue, Subspace).
    :raises ConvergenceError: If the Schur iteration fails.
    '''
    a = as_operator(a)
    dim = a.shape[0]
    upper, unitary, _ = _schur(a)
    eigenvalues = np.diag(upper)
    scale = max(scipy.linalg.norm(a, 2), TINY)
    clusters = _cluster(eigenvalues, scale, cluster_tol)
    centres = np.array([eigenvalues[members].mean() for members in clusters])
    result = []
    for index, members in enumerate(clusters):
        if len(clusters) == 1:
            basis = np.eye(dim, dtype=complex)
        else:
            def select(value, index=index):
                return bool(np.argmin(np.abs(centres - value)) == index)
            _, reordered, selected = _schur(a, sort=select)
            if selected != len(members):
                raise ConvergenceError('reordered Schur form selected %d of %d eigenvalues near %s'
                                       % (selected, len(members), centres[index]))
            basis = reordered[:, :selected]
        restricted = basis.conj().T.dot(a).dot(basis)
        eigenvalue = complex(np.trace(restricted) / len(members))
        spread = float(np.abs(eigenvalues[members] - centres[index]).max())
        if len(members) > 1 and spread > cluster_tol * scale:
            LOGGER.info('Merged %d eigenvalues spread by %.3g around %s', len(members), spread, eigenvalue)
        LOGGER.debug('Eigenvalue %s with multiplicity %d (spread %.3g)', eigenvalue, len(members), spread)
        result.append((eigenvalue, Subspace(basis, check=False)))
    result.sort(key=lambda item: (round(float(np.angle(item[0])), 9), round(abs(item[0]), 9)))
    return result


class JointEigenblock(object):
    '''
    A joint generalized eigenspace of commuting operators.

    :ivar lambdas: One eigenvalue per operator.
    :ivar space: The block as a Subspace.
    '''
    def __init__(self, lambdas, space):
        self.lambdas = tuple(complex(value) for value in lambdas)
        self.space = space

    def __repr__(self):
        return '%s(lambdas=%s, dim=%d)' % (self.__class__.__name__, self.lambdas, self.dim)

    @property
    def dim(self):
        return self.space.dim

    @property
    def basis(self):
        return self.space.basis


def check_commuting(operators, tol=COMMUTATOR_TOLERANCE):
    '''
    Largest pairwise relative commutator.

    :raises ContractError: If it exceeds ``tol``.
    '''
    worst = 0.0
    for i, first in enumerate(operators):
        for j in range(i + 1, len(operators)):
            residual = commutator_residual(first, operators[j])
            if residual > tol:
                raise ContractError('operators %d and %d do not commute' % (i, j), residual=residual)
            worst = max(worst, residual)
    return worst


def joint_eigenblocks(operators, cluster_tol=CLUSTER_TOLERANCE, unit_tol=None):
    '''
    Split C^r into joint generalized eigenspaces of commuting operators.

    The space is split by the first operator, each block is split by the
    restriction of the second, and so on.

    :param operators: Commuting invertible operators.
    :type operators: list
    :param unit_tol: If given, every eigenvalue must lie within this distance
        of the unit circle.
    :type unit_tol: float or None
    :rtype: list of JointEigenblock
    :raises ContractError: For non-commuting or singular input, or
        eigenvalues off the unit circle.
    '''
    operators = [as_operator(operator) for operator in operators]
    if not operators:
        raise ContractError('at least one operator is required')
    dim = operators[0].shape[0]
    if any(operator.shape[0] != dim for operator in operators):
        raise ContractError('operators have different dimensions')
    for index, operator in enumerate(operators):
        singular = scipy.linalg.svdvals(operator)
        if singular[-1] <= dim * EPS * singular[0]:
            raise ContractError('operator %d is singular' % index)
    check_commuting(operators)

    blocks = [((), np.eye(dim, dtype=complex))]
    for operator in operators:
        split = []
        for lambdas, basis in blocks:
            restricted = basis.conj().T.dot(operator).dot(basis)
            for eigenvalue, sub in spectrum(restricted, cluster_tol=cluster_tol):
                split.append((lambdas + (eigenvalue,), basis.dot(sub.basis)))
        blocks = split

    result = []
    for lambdas, basis in blocks:
        outside = np.eye(dim) - basis.dot(basis.conj().T)
        for operator in operators:
            residual = scipy.linalg.norm(outside.dot(operator).dot(basis), 2) / scipy.linalg.norm(operator, 2)
            if residual > INVARIANCE_TOLERANCE:
                raise ConvergenceError('joint block %s is not invariant' % (lambdas,), residual=float(residual))
        if unit_tol is not None:
            for value in lambdas:
                if abs(abs(value) - 1.0) > unit_tol:
                    raise ContractError('eigenvalue %s is not of modulus 1' % value, residual=abs(abs(value) - 1.0))
        result.append(JointEigenblock(lambdas, Subspace(basis, check=False)))
    LOGGER.debug('Split C^%d into %d joint blocks', dim, len(result))
    return result


def matrix_to_json(matrix):
    matrix = np.asarray(matrix, dtype=complex)
    return {
        'shape': list(matrix.shape),
        'entries': [[float(value.real), float(value.imag)] for value in matrix.ravel()],
    }


def matrix_from_json(obj):
    shape = tuple(int(size) for size in obj['shape'])
    entries = obj['entries']
    if len(shape) != 2 or len(entries) != shape[0] * shape[1]:
        raise ContractError('matrix entries do not match shape %s' % (shape,))
    return np.array([complex(re, im) for re, im in entries], dtype=complex).reshape(shape)


def operator_to_json(operator):
    '''
    ``{'dim': r, 'entries': [[re, im], ...]}`` with entries in row-major order.
    '''
    operator = np.asarray(operator, dtype=complex)
    return {
        'dim': int(operator.shape[0]),
        'entries': [[float(value.real), float(value.imag)] for value in operator.ravel()],
    }


def operator_from_json(obj):
    try:
        dim = int(obj['dim'])
        entries = obj['entries']
    except (KeyError, TypeError, ValueError):
        raise ContractError('operator JSON needs "dim" and "entries"')
    if dim < 1 or len(entries) != dim * dim:
        raise ContractError('operator JSON has %d entries for dim %d' % (len(entries), dim))
    return as_operator(np.array([complex(re, im) for re, im in entries]).reshape(dim, dim))


def random_invertible(rng, dim, spread=0.3):
    '''
    ``I + spread * G`` for a complex Gaussian G; well conditioned for small
    ``spread``.
    '''
    noise = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return np.eye(dim) + spread * noise / np.sqrt(2 * dim)


def random_unitary_similar_tuple(rng, dim, count, exponents=(0.0, -0.25, -0.5, -0.75), nilpotent_scale=0.5):
    '''
    Commuting operators conjugate to block-diagonal unit-modulus scalars
    times commuting unipotents.

    Each block draws one exponent per operator from ``exponents``; within a
    block the unipotent parts are exponentials of multiples of one strictly
    upper triangular matrix.

    :param rng: Random generator.
    :type rng: np.random.RandomState
    :returns: List of ``count`` operators.
    '''
    sizes = []
    remaining = dim
    while remaining:
        size = int(rng.randint(1, min(remaining, 3) + 1))
        sizes.append(size)
        remaining -= size
    blocks = [[] for _ in range(count)]
    for size in sizes:
        nilpotent = np.triu(rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size)), 1)
        nilpotent *= nilpotent_scale
        for j in range(count):
            beta = exponents[rng.randint(len(exponents))]
            coefficient = rng.standard_normal()
            blocks[j].append(np.exp(2j * np.pi * beta) * scipy.linalg.expm(coefficient * nilpotent))
    conjugator = random_invertible(rng, dim)
    inverse = np.linalg.inv(conjugator)
    return [as_operator(conjugator.dot(scipy.linalg.block_diag(*blocks[j])).dot(inverse)) for j in range(count)]
