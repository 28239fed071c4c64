"""
Bases of invariants, equivariant maps and morphisms, and their extension
to other levels.

All finite families act by signed permutations on every supported
sequence, so fixed spaces are computed exactly from orbits. The orthogonal
family is handled as its signed-permutation subgroup followed by the Lie
algebra constraints, solved in the orbit coefficients.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .exceptions import NonUniqueExtension, NotExtendable, SolverDiverged, UnsupportedGroup
from .groups import GroupFamily, discrete_generators, lie_algebra_basis
from .operators import EquivariantOperator
from .sequences import (
    Unknown,
    embedding,
    generation_degree,
    generator_action,
    presentation_degree,
    projection,
)
from .utils import (
    as_signed_permutation,
    get_setting,
    kron_signed_permutations,
    nullspace,
    signed_orbit_basis,
)

logger = logging.getLogger(__name__)


class ConstraintClass(str, Enum):
    INVARIANT = 'invariant'
    EQUIVARIANT = 'equivariant'
    MORPHISM = 'morphism'
    MORPHISM_WITH_ADJOINT = 'morphism_adjoint'


@dataclass(frozen=True, eq=False)
class BasisFamily:
    """
    A basis stored as the columns of a sparse matrix.

    For maps the columns are column-major vectorizations of operators
    V_n -> U_n. Columns are orthonormal in the metric-weighted inner product.
    """

    vectors: sparse.csc_matrix
    level: int
    constraint: ConstraintClass
    target: object
    source: object = None

    @property
    def dimension(self):
        return self.vectors.shape[1]

    def __len__(self):
        return self.dimension

    def combine(self, coefficients):
        coefficients = np.asarray(coefficients, dtype=float)
        return np.asarray(self.vectors @ coefficients).ravel()

    def operator(self, coefficients):
        return self._to_operator(self.combine(coefficients))

    def element(self, index):
        column = self.vectors[:, index]
        if self.source is None:
            return column.toarray().ravel()
        return self._to_operator(column)

    def operators(self):
        return [self.element(i) for i in range(self.dimension)]

    def _to_operator(self, vector):
        dim_v = self.source.dim(self.level)
        dim_u = self.target.dim(self.level)
        if sparse.issparse(vector):
            coo = sparse.coo_matrix(vector)
            index = coo.row
            values = coo.data
        else:
            index = np.flatnonzero(vector)
            values = vector[index]
        matrix = sparse.csr_matrix(
            (values, (index % dim_u, index // dim_u)), shape=(dim_u, dim_v)
        )
        return EquivariantOperator(self.source, self.target, self.level, self.level, matrix)


def vectorize(operator):
    """Column-major vectorization of an operator matrix."""
    coo = operator.matrix.tocoo()
    dim_u = operator.matrix.shape[0]
    vector = np.zeros(operator.matrix.shape[0] * operator.matrix.shape[1])
    np.add.at(vector, coo.col * dim_u + coo.row, coo.data)
    return vector


def _reference_generators(seq, n):
    """
    Discrete generators and Lie elements used for fixed-space computations.

    For the orthogonal family the discrete part is the full signed
    permutation subgroup, which shares the fixed space with O_n once the Lie
    constraints are added.
    """
    family = seq.family
    if family is None:
        return [], []
    size = seq.base_size(n)
    if family is GroupFamily.ORTHOGONAL:
        return discrete_generators(GroupFamily.SIGNED_SYM, size), lie_algebra_basis(family, size)
    actions = generator_action(seq, n)
    return actions.base_discrete, actions.base_lie


def _common_family(seq_v, seq_u):
    families = {seq_v.family, seq_u.family} - {None}
    if len(families) > 1:
        raise UnsupportedGroup('both sequences must use the same group family')
    return families.pop() if families else None


def _fixed_space(weights, discrete, lie):
    """Metric-orthonormal basis of the vectors fixed by every action."""
    signed = [as_signed_permutation(g) if not isinstance(g, tuple) else g for g in discrete]
    if all(s is not None for s in signed):
        basis = signed_orbit_basis(signed, weights)
    else:
        size = len(weights)
        stacked = sparse.vstack(
            [sparse.csr_matrix(g) - sparse.identity(size) for g in discrete], format='csr'
        )
        kernel = nullspace(stacked)
        gram = kernel.T @ (weights[:, None] * kernel)
        eigenvalues, eigenvectors = np.linalg.eigh(gram)
        kernel = kernel @ eigenvectors @ np.diag(eigenvalues**-0.5) @ eigenvectors.T
        basis = sparse.csc_matrix(kernel)

    lie_blocks = [lie_part @ basis for lie_part in lie]
    if lie_blocks and basis.shape[1]:
        coefficients = nullspace(sparse.vstack(lie_blocks, format='csr'))
        basis = sparse.csc_matrix(basis @ coefficients)
        basis.data[np.abs(basis.data) < 1e-14] = 0.0
        basis.eliminate_zeros()
    return sparse.csc_matrix(basis)


@lru_cache(maxsize=None)
def invariant_basis(seq, n, with_lie=True):
    """
    Orthonormal basis of V_n^{G_n}.

    Args:
        seq: Sequence
        n: level
        with_lie: impose the Lie algebra constraints (orthogonal family)

    Returns:
        BasisFamily with constraint INVARIANT
    """
    seq.check_level(n)
    discrete, lie = _reference_generators(seq, n)
    actions = [seq.action(n, g) for g in discrete]
    lie_actions = [seq.lie_action(n, h) for h in lie] if with_lie else []
    vectors = _fixed_space(np.asarray(seq.weights(n)), actions, lie_actions)
    logger.debug('invariant basis of %s at level %d has %d elements', seq, n, vectors.shape[1])
    return BasisFamily(vectors, n, ConstraintClass.INVARIANT, seq)


def _map_actions(seq_v, seq_u, n, with_lie):
    family = _common_family(seq_v, seq_u)
    reference = seq_u if seq_u.family is not None else seq_v
    if family is None:
        return [], []
    discrete, lie = _reference_generators(reference, n)
    actions = []
    for g in discrete:
        on_v = seq_v.action(n, g.T).T
        on_u = seq_u.action(n, g)
        signed_v = as_signed_permutation(on_v)
        signed_u = as_signed_permutation(on_u)
        if signed_v is not None and signed_u is not None:
            actions.append(kron_signed_permutations(signed_v, signed_u))
        else:
            actions.append(sparse.kron(on_v, on_u, format='csr'))
    lie_actions = []
    if with_lie:
        dim_v, dim_u = seq_v.dim(n), seq_u.dim(n)
        for h in lie:
            lie_actions.append(
                sparse.csr_matrix(
                    sparse.kron(sparse.identity(dim_v), seq_u.lie_action(n, h))
                    - sparse.kron(seq_v.lie_action(n, h).T, sparse.identity(dim_u))
                )
            )
    return actions, lie_actions


def map_weights(seq_v, seq_u, n):
    """Metric weights of L(V_n, U_n) in column-major coordinates."""
    return np.kron(1.0 / np.asarray(seq_v.weights(n)), np.asarray(seq_u.weights(n)))


@lru_cache(maxsize=None)
def equivariant_basis(seq_v, seq_u, n, with_lie=True):
    """
    Orthonormal basis of L(V_n, U_n)^{G_n}.

    Returns:
        BasisFamily with constraint EQUIVARIANT
    """
    seq_v.check_level(n)
    seq_u.check_level(n)
    discrete, lie = _map_actions(seq_v, seq_u, n, with_lie)
    vectors = _fixed_space(map_weights(seq_v, seq_u, n), discrete, lie)
    logger.debug(
        'equivariant basis %s -> %s at level %d has %d elements',
        seq_v, seq_u, n, vectors.shape[1],
    )
    return BasisFamily(vectors, n, ConstraintClass.EQUIVARIANT, seq_u, seq_v)


def _degree_or_fallback(seq, n0, what):
    degree = generation_degree(seq)
    if isinstance(degree, Unknown):
        logger.warning(
            'generation degree of %s is %s; imposing %s constraints up to level %d',
            seq, degree, what, n0 - 1,
        )
        return n0 - 1
    return degree


def _warn_presentation(seq, n0):
    degree = presentation_degree(seq)
    if isinstance(degree, Unknown):
        logger.warning('presentation degree of %s is %s', seq, degree)
    elif n0 < degree:
        logger.warning('n0=%d is below the presentation degree %d of %s', n0, degree, seq)


def restriction_constraints(seq_v, seq_u, n0, with_adjoint):
    """
    Sparse maps on vectorized operators whose kernels are the morphism conditions.

    A(V_i) ⊆ U_i for i up to the generation degree of V, and with the
    adjoint condition also A(V_i^⊥) ⊆ U_i^⊥ up to the generation degree of U.
    """
    blocks = []
    first = max(seq_v.min_level(), seq_u.min_level(), 1 if not seq_v.doubling else 0)
    top_v = min(_degree_or_fallback(seq_v, n0, 'morphism'), n0 - 1)
    dim_v0, dim_u0 = seq_v.dim(n0), seq_u.dim(n0)
    for i in range(first, top_v + 1):
        phi = embedding(seq_v, i, n0).matrix
        psi = embedding(seq_u, i, n0).matrix
        psi_star = projection(seq_u, n0, i).matrix
        off_u = sparse.identity(dim_u0, format='csr') - psi @ psi_star
        blocks.append(sparse.kron(phi.T, off_u, format='csr'))
    if with_adjoint:
        top_u = min(_degree_or_fallback(seq_u, n0, 'adjoint morphism'), n0 - 1)
        for i in range(first, top_u + 1):
            phi = embedding(seq_v, i, n0).matrix
            phi_star = projection(seq_v, n0, i).matrix
            psi_star = projection(seq_u, n0, i).matrix
            off_v = sparse.identity(dim_v0, format='csr') - phi @ phi_star
            blocks.append(sparse.kron(off_v.T, psi_star, format='csr'))
    return blocks


@lru_cache(maxsize=None)
def morphism_basis(seq_v, seq_u, n0, with_adjoint=False):
    """
    Equivariant maps at level n0 that extend to morphisms of sequences.

    Args:
        seq_v: source sequence
        seq_u: target sequence
        n0: level of the basis; should be at least both presentation degrees
        with_adjoint: also require the adjoint to extend to a morphism

    Returns:
        BasisFamily with constraint MORPHISM or MORPHISM_WITH_ADJOINT
    """
    _warn_presentation(seq_v, n0)
    _warn_presentation(seq_u, n0)
    base = equivariant_basis(seq_v, seq_u, n0)
    constraint = (
        ConstraintClass.MORPHISM_WITH_ADJOINT if with_adjoint else ConstraintClass.MORPHISM
    )
    blocks = restriction_constraints(seq_v, seq_u, n0, with_adjoint)
    if not blocks or base.dimension == 0:
        return BasisFamily(base.vectors, n0, constraint, seq_u, seq_v)
    stacked = sparse.vstack([block @ base.vectors for block in blocks], format='csr')
    coefficients = nullspace(stacked)
    vectors = sparse.csc_matrix(base.vectors @ coefficients)
    vectors.data[np.abs(vectors.data) < 1e-14] = 0.0
    vectors.eliminate_zeros()
    return BasisFamily(vectors, n0, constraint, seq_u, seq_v)


def clear_basis_caches():
    """Forget every cached basis, e.g. after RANK_TOLERANCE changes."""
    for cached in (invariant_basis, equivariant_basis, morphism_basis):
        cached.cache_clear()


def _lsqr_cap(unknowns):
    return int(10 * np.sqrt(max(unknowns, 1)) + 500)


def _solve_extension(matrix, rhs, seed=0):
    """
    Least-squares solve of the projection constraint in basis coordinates,
    with a second solve from a perturbed start to detect non-uniqueness.
    """
    tol = get_setting('LSQR_TOLERANCE')
    residual_tol = get_setting('RESIDUAL_TOLERANCE')
    unknowns = matrix.shape[1]
    if unknowns == 0:
        if np.linalg.norm(rhs) > residual_tol:
            raise NotExtendable('the equivariant space at the target level is empty')
        return np.zeros(0)
    cap = _lsqr_cap(unknowns)
    result = splinalg.lsqr(matrix, rhs, atol=tol, btol=tol, iter_lim=cap)
    solution, istop = result[0], result[1]
    if istop == 7:
        raise SolverDiverged(f'LSQR hit its iteration cap of {cap}')
    scale = max(1.0, float(np.linalg.norm(rhs)))
    residual = float(np.linalg.norm(matrix @ solution - rhs))
    if residual > residual_tol * scale:
        raise NotExtendable(f'projection constraint residual {residual:.3e} is too large')

    rng = np.random.default_rng(seed)
    start = solution + rng.standard_normal(unknowns) * (1.0 + np.linalg.norm(solution))
    again = splinalg.lsqr(matrix, rhs, atol=tol, btol=tol, iter_lim=cap, x0=start)[0]
    gap = float(np.linalg.norm(again - solution))
    if gap > 1e-6 * (1.0 + np.linalg.norm(solution)):
        raise NonUniqueExtension(
            f'extension is not unique (solutions differ by {gap:.3e}); raise n0'
        )
    return solution


def _clean(vector):
    peak = np.abs(vector).max() if vector.size else 0.0
    vector = vector.copy()
    vector[np.abs(vector) <= 1e-13 * max(peak, 1.0)] = 0.0
    return vector


def extend_operator(seq_v, seq_u, operator, n):
    """
    The equivariant operator at level n that projects onto ``operator``.

    Below the stored level the answer is the restriction ψ* A φ. Above it,
    the projection constraint is solved over a basis of equivariant maps at
    level n.

    Raises:
        NonUniqueExtension: the constraint does not pin down the operator
        NotExtendable: no equivariant operator projects onto ``operator``
        SolverDiverged: LSQR iteration cap reached
    """
    n0 = operator.source_level
    if n == n0:
        return operator
    if n < n0:
        matrix = (
            projection(seq_u, n0, n).matrix @ operator.matrix @ embedding(seq_v, n, n0).matrix
        )
        return EquivariantOperator(seq_v, seq_u, n, n, matrix)

    family = _common_family(seq_v, seq_u)
    orthogonal = family is GroupFamily.ORTHOGONAL
    basis = equivariant_basis(seq_v, seq_u, n, with_lie=not orthogonal)
    phi = embedding(seq_v, n0, n).matrix
    psi_star = projection(seq_u, n, n0).matrix
    constraint = sparse.kron(phi.T, psi_star, format='csr') @ basis.vectors
    coefficients = _solve_extension(sparse.csr_matrix(constraint), vectorize(operator))
    extended = basis._to_operator(_clean(basis.combine(coefficients)))
    if orthogonal:
        residual = commutation_residual(extended)
        if residual > get_setting('RESIDUAL_TOLERANCE') * max(1.0, extended.frobenius_norm()):
            logger.warning(
                'extension to level %d is only invariant under signed permutations '
                '(Lie residual %.3e)', n, residual,
            )
    return extended


def extend_invariant(seq_u, vector, n0, n):
    """The invariant vector at level n projecting onto ``vector`` at level n0."""
    vector = np.asarray(vector, dtype=float)
    if n == n0:
        return vector
    if n < n0:
        return np.asarray(projection(seq_u, n0, n).matrix @ vector).ravel()
    orthogonal = seq_u.family is GroupFamily.ORTHOGONAL
    basis = invariant_basis(seq_u, n, with_lie=not orthogonal)
    constraint = projection(seq_u, n, n0).matrix @ basis.vectors
    coefficients = _solve_extension(sparse.csr_matrix(constraint), vector)
    return _clean(basis.combine(coefficients))


def commutation_residual(operator):
    """Largest ‖ρ_U(h)A − Aρ_V(h)‖_F over discrete generators and Lie elements."""
    seq_v, seq_u, n = operator.source, operator.target, operator.source_level
    reference = seq_u if seq_u.family is not None else seq_v
    if reference.family is None:
        return 0.0
    actions = generator_action(reference, n)
    worst = 0.0
    matrix = operator.matrix
    for g in actions.base_discrete:
        diff = seq_u.action(n, g) @ matrix - matrix @ seq_v.action(n, g)
        worst = max(worst, splinalg.norm(diff) if diff.nnz else 0.0)
    for h in actions.base_lie:
        diff = seq_u.lie_action(n, h) @ matrix - matrix @ seq_v.lie_action(n, h)
        worst = max(worst, splinalg.norm(diff) if diff.nnz else 0.0)
    return float(worst)


def invariance_residual(seq, n, vector):
    vector = np.asarray(vector, dtype=float)
    if seq.family is None:
        return 0.0
    actions = generator_action(seq, n)
    worst = 0.0
    for g in actions.discrete:
        worst = max(worst, float(np.linalg.norm(g @ vector - vector)))
    for h in actions.lie:
        worst = max(worst, float(np.linalg.norm(h @ vector)))
    return worst


def morphism_residual(operator, with_adjoint=False):
    """Largest residual of the restriction conditions for a level-n0 operator."""
    blocks = restriction_constraints(
        operator.source, operator.target, operator.source_level, with_adjoint
    )
    vector = vectorize(operator)
    if not blocks:
        return 0.0
    return float(max(np.linalg.norm(block @ vector) for block in blocks))
