'''
Commuting monodromy operators and their Deligne data.

A tuple ``T_1, ..., T_p`` is split into joint generalized eigenblocks. On a
block with eigenvalues ``lambda_j`` the exponent ``beta_j`` is the unique
number in ``(alpha_j - 1, alpha_j]`` with ``exp(2 pi i beta_j) = lambda_j``
and ``N_j = log(lambda_j^-1 T_j) / (2 pi i)``; assembling blockwise gives
commuting ``S_j`` (semisimple) and ``N_j`` (nilpotent) with
``T_j = exp(2 pi i (S_j + N_j))``.

Two coordinate systems are used for sections:

* flat coordinates, where a flat section is a constant vector and a section
  of the bundle is single-valued when ``s(z + 2 pi i e_j) = T_j^-1 s(z)``;
* the descended trivialization ``s -> exp(sum z_j (S_j + N_j)) s`` in which
  single-valued sections are literally periodic and flat sections satisfy
  ``v(z + 2 pi i e_j) = T_j v(z)``.
'''
import logging

import numpy as np
import scipy.linalg

from hodgeorbit.numlin import (
    CLUSTER_TOLERANCE,
    COMMUTATOR_TOLERANCE,
    ContractError,
    ConvergenceError,
    as_operator,
    check_commuting,
    commutator_residual,
    joint_eigenblocks,
    log_unipotent,
    matrix_exp,
    matrix_to_json,
    operator_to_json,
)

LOGGER = logging.getLogger(__name__)

UNIT_MODULUS_TOLERANCE = 1e-8
ENDPOINT_SNAP = 1e-10
EQUIVARIANCE_TOLERANCE = 1e-8
RECONSTRUCTION_TOLERANCE = 1e-8
RESIDUE_COMMUTATOR_TOLERANCE = 1e-9
BLOCK_TOLERANCE = 1e-8
CONDITION_WARNING = 1e8

TWO_PI_I = 2j * np.pi


def log_coordinates(z, count):
    '''
    Coerce ``z`` to a complex vector of length ``count``.
    '''
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.ndim != 1 or z.size != count:
        raise ContractError('expected %d log coordinates, got %s' % (count, z.tolist()))
    if not np.all(np.isfinite(z)):
        raise ContractError('log coordinates must be finite')
    return z


class MonodromyTuple(object):
    '''
    Commuting monodromy operators whose eigenvalues lie on the unit circle.

    :ivar operators: Tuple of read-only operators.
    :ivar commutation_residual: Largest relative pairwise commutator.
    :ivar blocks: Joint eigenblocks (see :func:`hodgeorbit.numlin.joint_eigenblocks`).
    '''
    def __init__(self, operators, commutator_tol=COMMUTATOR_TOLERANCE, unit_tol=UNIT_MODULUS_TOLERANCE,
                 cluster_tol=CLUSTER_TOLERANCE):
        self.operators = tuple(as_operator(operator) for operator in operators)
        if not self.operators:
            raise ContractError('a monodromy tuple needs at least one operator')
        if len(set(operator.shape for operator in self.operators)) != 1:
            raise ContractError('monodromy operators have different dimensions')
        self.commutation_residual = check_commuting(self.operators, commutator_tol)
        self.cluster_tol = cluster_tol
        self.blocks = joint_eigenblocks(self.operators, cluster_tol=cluster_tol, unit_tol=unit_tol)

    def __repr__(self):
        return '%s(count=%d, rank=%d)' % (self.__class__.__name__, len(self), self.rank)

    def __len__(self):
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)

    def __getitem__(self, index):
        return self.operators[index]

    @property
    def rank(self):
        return self.operators[0].shape[0]

    def polarization_residual(self, polarization):
        '''
        Largest ``||T^H Q T - Q|| / ||Q||``.
        '''
        polarization = np.asarray(polarization, dtype=complex)
        scale = scipy.linalg.norm(polarization, 2)
        return max(float(scipy.linalg.norm(t.conj().T.dot(polarization).dot(t) - polarization, 2) / scale)
                   for t in self.operators)

    def to_json(self):
        return {'operators': [operator_to_json(operator) for operator in self.operators]}


def exponent_in_window(eigenvalue, alpha, snap=ENDPOINT_SNAP):
    '''
    The unique beta in ``(alpha - 1, alpha]`` with ``exp(2 pi i beta)`` equal
    to the unit-normalized eigenvalue.

    Results within ``snap`` of either end of the window are set to alpha, so
    eigenvalues at ``exp(2 pi i alpha)`` land on the closed end regardless of
    rounding.
    '''
    angle = np.angle(eigenvalue * np.exp(-TWO_PI_I * alpha))
    if angle > 0:
        angle -= 2 * np.pi
    beta = alpha + angle / (2 * np.pi)
    if alpha - beta <= snap or beta - (alpha - 1) <= snap:
        beta = alpha
    return float(beta)


class MonodromyBlock(object):
    '''
    One joint eigenblock with its exponents and nilpotent logarithms.

    :ivar lambdas: Eigenvalue of each generator on the block.
    :ivar space: Orthonormal basis of the block.
    :ivar betas: Exponents, one per generator.
    :ivar nilpotents: ``N_j`` restricted to the block, in block coordinates.
    '''
    def __init__(self, lambdas, space, betas, nilpotents):
        self.lambdas = tuple(lambdas)
        self.space = space
        self.betas = np.array(betas, dtype=float)
        self.nilpotents = list(nilpotents)

    def __repr__(self):
        return '%s(betas=%s, dim=%d)' % (self.__class__.__name__, self.betas.tolist(), self.dim)

    @property
    def dim(self):
        return self.space.dim

    @property
    def basis(self):
        return self.space.basis

    def to_json(self):
        return {
            'dim': self.dim,
            'lambdas': [[value.real, value.imag] for value in self.lambdas],
            'betas': self.betas.tolist(),
            'basis': matrix_to_json(self.basis),
            'nilpotent': [operator_to_json(n) for n in self.nilpotents],
        }


class MonodromyDecomposition(object):
    '''
    Output of :func:`decompose`.

    :ivar alpha: Window parameters.
    :ivar blocks: List of MonodromyBlock.
    :ivar semisimple: Global ``S_j``.
    :ivar nilpotent: Global ``N_j``.
    :ivar condition: Condition number of the block basis.
    :ivar monodromy: The decomposed MonodromyTuple.
    '''
    def __init__(self, alpha, blocks, semisimple, nilpotent, condition, monodromy):
        self.alpha = np.array(alpha, dtype=float)
        self.blocks = blocks
        self.semisimple = semisimple
        self.nilpotent = nilpotent
        self.condition = float(condition)
        self.monodromy = monodromy
        self._block_basis = np.hstack([block.basis for block in blocks])
        self._block_inverse = np.linalg.inv(self._block_basis)

    def __repr__(self):
        return '%s(alpha=%s, blocks=%d)' % (self.__class__.__name__, self.alpha.tolist(), len(self.blocks))

    @property
    def rank(self):
        return self._block_basis.shape[0]

    @property
    def count(self):
        return len(self.alpha)

    def residues(self):
        '''
        ``R_j = S_j + N_j``.
        '''
        return [s + n for s, n in zip(self.semisimple, self.nilpotent)]

    def block_basis(self):
        return self._block_basis

    def block_slices(self):
        slices = []
        start = 0
        for block in self.blocks:
            slices.append(slice(start, start + block.dim))
            start += block.dim
        return slices

    def slack(self):
        '''
        ``1 - (beta_max - beta_min)`` per generator; positive by construction.
        '''
        betas = np.array([block.betas for block in self.blocks])
        return (1.0 - (betas.max(axis=0) - betas.min(axis=0))).tolist()

    def block_of(self, vector, tol=BLOCK_TOLERANCE):
        '''
        Index of the only block containing ``vector``.

        :raises ContractError: If the vector is zero or has components in
            more than one block.
        '''
        vector = np.asarray(vector, dtype=complex).ravel()
        norm = np.linalg.norm(vector)
        if not norm:
            raise ContractError('the zero vector does not select a block')
        coefficients = self._block_inverse.dot(vector)
        weights = [np.linalg.norm(block.basis.dot(coefficients[s])) / norm
                   for block, s in zip(self.blocks, self.block_slices())]
        occupied = [index for index, weight in enumerate(weights) if weight > tol]
        if len(occupied) != 1:
            raise ContractError('vector straddles blocks %s' % occupied,
                                residual=float(sorted(weights)[-2]) if len(weights) > 1 else 0.0)
        return occupied[0]

    def twist_operator(self, z):
        '''
        ``exp(-sum_j z_j (S_j + N_j))``.
        '''
        z = log_coordinates(z, self.count)
        return matrix_exp(-sum(zj * r for zj, r in zip(z, self.residues())))

    def untwist_operator(self, z):
        '''
        ``exp(sum_j z_j (S_j + N_j))``.
        '''
        z = log_coordinates(z, self.count)
        return matrix_exp(sum(zj * r for zj, r in zip(z, self.residues())))

    def to_json(self):
        return {
            'alpha': self.alpha.tolist(),
            'blocks': [block.to_json() for block in self.blocks],
            'semisimple': [operator_to_json(s) for s in self.semisimple],
            'nilpotent': [operator_to_json(n) for n in self.nilpotent],
            'condition': self.condition,
            'slack': self.slack(),
        }


def decompose(monodromy, alpha, cluster_tol=CLUSTER_TOLERANCE):
    '''
    Split commuting monodromy into exponents and nilpotent logarithms.

    :param monodromy: The operators T_j.
    :type monodromy: MonodromyTuple or list
    :param alpha: Window parameters, one per generator (a scalar is repeated).
    :rtype: MonodromyDecomposition
    :raises ContractError: For non-commuting operators or eigenvalues off the
        unit circle.
    :raises ConvergenceError: If the assembled operators do not reproduce T.
    '''
    if not isinstance(monodromy, MonodromyTuple):
        monodromy = MonodromyTuple(monodromy, cluster_tol=cluster_tol)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.size == 1 and len(monodromy) > 1:
        alpha = np.repeat(alpha, len(monodromy))
    if alpha.size != len(monodromy) or not np.all(np.isfinite(alpha)):
        raise ContractError('alpha must hold %d finite values, got %s' % (len(monodromy), alpha.tolist()))

    blocks = []
    for joint in monodromy.blocks:
        basis = joint.basis
        lambdas = []
        betas = []
        nilpotents = []
        for operator, window in zip(monodromy, alpha):
            restricted = basis.conj().T.dot(operator).dot(basis)
            eigenvalue = complex(np.trace(restricted) / joint.dim)
            lambdas.append(eigenvalue)
            betas.append(exponent_in_window(eigenvalue, window))
            nilpotents.append(log_unipotent(restricted / eigenvalue) / TWO_PI_I)
        blocks.append(MonodromyBlock(lambdas, joint.space, betas, nilpotents))

    basis = np.hstack([block.basis for block in blocks])
    inverse = np.linalg.inv(basis)
    condition = np.linalg.cond(basis)
    semisimple = []
    nilpotent = []
    for j in range(len(monodromy)):
        diagonal = scipy.linalg.block_diag(*[block.betas[j] * np.eye(block.dim) for block in blocks])
        semisimple.append(as_operator(basis.dot(diagonal).dot(inverse)))
        logs = scipy.linalg.block_diag(*[block.nilpotents[j] for block in blocks])
        nilpotent.append(as_operator(basis.dot(logs).dot(inverse)))

    for j, operator in enumerate(monodromy):
        rebuilt = matrix_exp(TWO_PI_I * (semisimple[j] + nilpotent[j]))
        residual = scipy.linalg.norm(rebuilt - operator, 2) / scipy.linalg.norm(operator, 2)
        if residual > RECONSTRUCTION_TOLERANCE:
            raise ConvergenceError('exp(2 pi i (S_%d + N_%d)) does not reproduce T_%d' % (j, j, j),
                                   residual=float(residual))
    residues = semisimple + nilpotent
    worst = max([commutator_residual(a, b) for i, a in enumerate(residues) for b in residues[i + 1:]] or [0.0])
    if worst > RESIDUE_COMMUTATOR_TOLERANCE:
        LOGGER.warning('Residues commute only to %.3g', worst)
    if condition > CONDITION_WARNING:
        LOGGER.warning('Joint block basis has condition number %.3g', condition)
    LOGGER.info('Decomposed %d operator(s) of rank %d into %d block(s), basis condition %.3g',
                len(monodromy), monodromy.rank, len(blocks), condition)
    return MonodromyDecomposition(alpha, blocks, semisimple, nilpotent, condition, monodromy)


def lift_flat_section(dec, vector):
    '''
    The flat section through ``vector`` in the descended trivialization,
    ``z -> exp(sum z_j (S_j + N_j)) v``.
    '''
    vector = np.asarray(vector, dtype=complex).ravel()

    def flat_eval(z):
        return dec.untwist_operator(z).dot(vector)
    return flat_eval


def equivariance_residual(monodromy, flat_eval, z):
    '''
    Largest relative ``||v(z + 2 pi i e_j) - T_j v(z)||``.
    '''
    z = log_coordinates(z, len(monodromy))
    value = np.asarray(flat_eval(z), dtype=complex)
    scale = max(np.linalg.norm(value), np.finfo(float).tiny)
    worst = 0.0
    for j, operator in enumerate(monodromy):
        shifted = z.copy()
        shifted[j] += TWO_PI_I
        worst = max(worst, np.linalg.norm(np.asarray(flat_eval(shifted)) - operator.dot(value)) / scale)
    return float(worst)


def twist_flat_section(dec, vector, z, flat_eval, tol=EQUIVARIANCE_TOLERANCE):
    '''
    ``exp(-sum_j (beta_j + N_j) z_j) v(z)`` for a flat section in one block.

    :param vector: Flat section at the base point, selecting the block.
    :param z: Log coordinates.
    :param flat_eval: Evaluator of the multivalued section in the descended
        trivialization, with ``v(z + 2 pi i e_j) = T_j v(z)``.
    :type flat_eval: callable
    :raises ContractError: If the section straddles blocks or ``flat_eval``
        is not equivariant at z.
    '''
    index = dec.block_of(vector)
    z = log_coordinates(z, dec.count)
    residual = equivariance_residual(dec.monodromy, flat_eval, z)
    if residual > tol:
        raise ContractError('flat section evaluator is not equivariant', residual=residual)
    value = np.asarray(flat_eval(z), dtype=complex)
    if dec.block_of(value) != index:
        raise ContractError('flat section leaves block %d' % index)
    return dec.twist_operator(z).dot(value)


class TwistedSection(object):
    '''
    Twisted frame entry ``z -> exp(-sum z_j (S_j + N_j)) v`` in flat
    coordinates, for a flat vector v in one block.
    '''
    def __init__(self, dec, vector, block):
        self.dec = dec
        self.vector = np.asarray(vector, dtype=complex)
        self.block = block

    def __repr__(self):
        return '%s(block=%d, betas=%s)' % (self.__class__.__name__, self.block, self.betas.tolist())

    @property
    def betas(self):
        return self.dec.blocks[self.block].betas

    def __call__(self, z):
        return self.dec.twist_operator(z).dot(self.vector)


def deligne_frame(dec):
    '''
    Twisted frame ``v~_1, ..., v~_r`` built from the block bases.

    :rtype: list of TwistedSection
    '''
    frame = []
    for index, block in enumerate(dec.blocks):
        for column in range(block.dim):
            frame.append(TwistedSection(dec, block.basis[:, column], index))
    return frame


def shift_residual(evaluator, z, monodromy=None):
    '''
    Single-valuedness residual of a section evaluator.

    With ``monodromy`` the evaluator is read in flat coordinates and compared
    with ``T_j^-1 s(z)``; without, shifted values must be equal.
    '''
    count = len(monodromy) if monodromy is not None else np.atleast_1d(z).size
    z = log_coordinates(z, count)
    value = np.asarray(evaluator(z), dtype=complex)
    scale = max(np.linalg.norm(value), np.finfo(float).tiny)
    worst = 0.0
    for j in range(count):
        shifted = z.copy()
        shifted[j] += TWO_PI_I
        expected = value if monodromy is None else np.linalg.solve(monodromy[j], value)
        worst = max(worst, np.linalg.norm(np.asarray(evaluator(shifted)) - expected) / scale)
    return float(worst)


def dual_monodromy(monodromy, hermitian=False):
    '''
    Monodromy of the dual local system.

    The default is the contragredient ``(T^T)^-1``, for which
    ``Sp(T~) = {1 / lambda}`` and the bilinear pairing ``mu^T v`` is
    invariant. ``hermitian=True`` gives ``(T^H)^-1`` instead, which is T
    itself for unitary T; both agree on real operators.

    :rtype: MonodromyTuple
    '''
    if not isinstance(monodromy, MonodromyTuple):
        monodromy = MonodromyTuple(monodromy)
    adjoint = (lambda t: t.conj().T) if hermitian else (lambda t: t.T)
    return MonodromyTuple([np.linalg.inv(adjoint(t)) for t in monodromy], cluster_tol=monodromy.cluster_tol)


def dual_window(dec):
    '''
    ``alpha~_j = -min beta_j``, the window which makes the dual exponents
    exactly ``-beta``.
    '''
    betas = np.array([block.betas for block in dec.blocks])
    return (-betas.min(axis=0)).tolist()


class DualPairingReport(object):
    '''
    :ivar off_block: Largest pairing between mismatched blocks.
    :ivar matched: (dual block, block, smallest singular value) for matched
        pairs.
    :ivar unmatched: Blocks without a matching dual block.
    '''
    def __init__(self, off_block, matched, unmatched, tol):
        self.off_block = float(off_block)
        self.matched = matched
        self.unmatched = unmatched
        self.tol = tol

    @property
    def passed(self):
        return (self.off_block <= self.tol and not self.unmatched
                and all(value > self.tol for _, _, value in self.matched))

    def to_dict(self):
        return {
            'passed': self.passed,
            'off_block': self.off_block,
            'matched': [{'dual_block': a, 'block': b, 'min_singular_value': value} for a, b, value in self.matched],
            'unmatched': self.unmatched,
        }


def _matches(dual_lambdas, lambdas, hermitian):
    expected = [1.0 / (np.conj(value) if hermitian else value) for value in lambdas]
    return all(abs(a - b) <= 1e-6 for a, b in zip(dual_lambdas, expected))


def pairing_matrix(dual_dec, dec, hermitian=False):
    dual_basis = dual_dec.block_basis()
    return (dual_basis.conj().T if hermitian else dual_basis.T).dot(dec.block_basis())


def check_dual_pairing(dec, dual_dec, tol=1e-9, hermitian=False):
    '''
    Pair the block bases of a decomposition with those of its dual.

    Mismatched blocks must pair to zero and matched ones nondegenerately.

    :rtype: DualPairingReport
    '''
    pairing = pairing_matrix(dual_dec, dec, hermitian)
    off_block = 0.0
    matched = []
    found = set()
    for a, (dual_block, rows) in enumerate(zip(dual_dec.blocks, dual_dec.block_slices())):
        for b, (block, columns) in enumerate(zip(dec.blocks, dec.block_slices())):
            sub = pairing[rows, columns]
            if _matches(dual_block.lambdas, block.lambdas, hermitian) and dual_block.dim == block.dim:
                matched.append((a, b, float(scipy.linalg.svdvals(sub)[-1])))
                found.add(b)
            elif sub.size:
                off_block = max(off_block, float(np.abs(sub).max()))
    unmatched = [b for b in range(len(dec.blocks)) if b not in found]
    report = DualPairingReport(off_block, matched, unmatched, tol)
    LOGGER.debug('Dual pairing: off-block %.3g, %d matched pair(s)', off_block, len(matched))
    return report


def dual_frame_constancy(dec, dual_dec, zs):
    '''
    Largest change of ``mu~(z)^T v~(z)`` between matched twisted frames over
    the sample points ``zs``, relative to the pairing at the first point.
    '''
    dual_basis = dual_dec.block_basis()
    basis = dec.block_basis()
    reference = None
    worst = 0.0
    for z in zs:
        value = dual_dec.twist_operator(z).dot(dual_basis).T.dot(dec.twist_operator(z).dot(basis))
        if reference is None:
            reference = value
            continue
        worst = max(worst, np.abs(value - reference).max() / max(np.abs(reference).max(), 1.0))
    return float(worst)
