"""
Constant-sized descriptions of invariant cones.

PSD cones are reduced by simultaneously block diagonalizing the commutant of
the group action: one random symmetric commutant element is diagonalized, its
eigenspaces are grouped into isotypic components and aligned with a second
random element, and the result is validated on further samples. Relative
entropy and SAGE cones are reduced with orbit indicators of the index set.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.csgraph import connected_components
from scipy.special import rel_entr

from .equivariant import equivariant_basis
from .exceptions import (
    DegenerateSample,
    Indeterminate,
    Infeasible,
    NonInvariantData,
    NonInvariantSupport,
    NumericalFailure,
    UnsupportedGroup,
)
from .groups import GroupFamily, as_family, discrete_generators
from .sequences import Unknown, generation_degree, generator_action, presentation_degree
from .solver import ConeBlock, ConeKind, ConicProgram, solve
from .utils import get_setting, smat, svec

logger = logging.getLogger(__name__)

VALIDATION_SAMPLES = 5
PATTERN_TOLERANCE = 1e-7
INVARIANCE_TOLERANCE = 1e-8
LINK_TOLERANCE = 1e-8


# Block diagonalization


@dataclass(frozen=True, eq=False)
class BlockStructure:
    """
    Orthogonal Q with Q^T X Q = ⊕ X_λ ⊗ I_{d_λ} for every commutant element X.

    ``q`` acts on orthonormal coordinates of V_n and ``blocks`` lists
    (multiplicity, irreducible dimension) pairs in column order.
    """

    level: int
    q: np.ndarray
    blocks: tuple

    @property
    def dim(self):
        return self.q.shape[0]

    def slices(self):
        out, start = [], 0
        for multiplicity, dimension in self.blocks:
            out.append(slice(start, start + multiplicity * dimension))
            start += multiplicity * dimension
        return out

    def pattern(self, matrix):
        """The blocks X_λ of a matrix in orthonormal coordinates."""
        rotated = self.q.T @ np.asarray(matrix, dtype=float) @ self.q
        out = []
        for (multiplicity, dimension), where in zip(self.blocks, self.slices()):
            block = rotated[where, where].reshape(multiplicity, dimension, multiplicity, dimension)
            out.append(np.einsum('iaja->ij', block) / dimension)
        return out

    def assemble(self, blocks):
        """Q (⊕ X_λ ⊗ I) Q^T."""
        pieces = [
            np.kron(np.asarray(x, dtype=float), np.eye(dimension))
            for x, (_, dimension) in zip(blocks, self.blocks)
        ]
        middle = linalg.block_diag(*pieces) if pieces else np.zeros((0, 0))
        return self.q @ middle @ self.q.T

    def off_pattern(self, matrix):
        """Relative Frobenius mass of a matrix outside the block pattern."""
        matrix = np.asarray(matrix, dtype=float)
        scale = np.linalg.norm(matrix)
        if scale == 0:
            return 0.0
        return float(np.linalg.norm(matrix - self.assemble(self.pattern(matrix))) / scale)


def _orthonormal_scaling(seq, n):
    return np.sqrt(np.asarray(seq.weights(n), dtype=float))


def _commutant(seq, n):
    """Commutant basis elements in orthonormal coordinates."""
    root = _orthonormal_scaling(seq, n)
    basis = equivariant_basis(seq, seq, n)
    return [
        (sparse.diags(root) @ op.matrix @ sparse.diags(1.0 / root)).toarray()
        for op in basis.operators()
    ]


def _sample(elements, rng):
    coefficients = rng.standard_normal(len(elements))
    return sum(c * e for c, e in zip(coefficients, elements))


def _split(eigenvalues):
    spread = eigenvalues[-1] - eigenvalues[0]
    if spread <= 0:
        return [np.arange(len(eigenvalues))]
    cuts = np.flatnonzero(np.diff(eigenvalues) > get_setting('EIGEN_GAP') * spread) + 1
    return np.split(np.arange(len(eigenvalues)), cuts)


def _attempt(elements, dim, level, rng):
    """One sampled decomposition, or None when the sample is degenerate."""
    symmetric = _sample(elements, rng)
    symmetric = (symmetric + symmetric.T) / 2
    values, vectors = np.linalg.eigh(symmetric)
    clusters = [vectors[:, index] for index in _split(values)]

    link = _sample(elements, rng)
    scale = max(np.linalg.norm(link), 1.0)
    count = len(clusters)
    adjacency = np.zeros((count, count))
    for i in range(count):
        for j in range(count):
            coupling = np.linalg.norm(clusters[i].T @ link @ clusters[j])
            adjacency[i, j] = coupling > LINK_TOLERANCE * scale
    components, labels = connected_components(
        sparse.csr_matrix(adjacency + adjacency.T), directed=False
    )

    groups = []
    for component in range(components):
        members = [clusters[i] for i in np.flatnonzero(labels == component)]
        dimension = members[0].shape[1]
        if any(member.shape[1] != dimension for member in members):
            return None
        reference = members[0]
        aligned = [reference]
        for member in members[1:]:
            coupling = member.T @ link @ reference
            if np.linalg.norm(coupling) <= LINK_TOLERANCE * scale:
                return None
            aligned.append(member @ linalg.polar(coupling)[0])
        groups.append(((len(members), dimension), np.hstack(aligned)))

    groups.sort(key=lambda item: (item[0][1], item[0][0]))
    q = np.hstack([columns for _, columns in groups]) if groups else np.zeros((dim, 0))
    return BlockStructure(level, q, tuple(shape for shape, _ in groups))


def block_diagonalize(seq, n, seed=0):
    """
    Numerical simultaneous block diagonalization of the commutant of G_n on V_n.

    Args:
        seq: Sequence of a family with real-type irreducibles
        n: level
        seed: seed for the random commutant samples

    Returns:
        BlockStructure with blocks sorted by irreducible dimension

    Raises:
        UnsupportedGroup: the cyclic family, whose irreducibles are complex
        DegenerateSample: every resample had coinciding eigenvalues
    """
    family = seq.family
    if family is GroupFamily.CYCLIC:
        raise UnsupportedGroup(
            'cyclic irreducibles are complex; block diagonalization needs real type'
        )
    if family is GroupFamily.ORTHOGONAL:
        logger.warning('block diagonalization for the orthogonal family is best-effort')
    dim = seq.dim(n)
    if dim == 0:
        return BlockStructure(n, np.zeros((0, 0)), ())
    elements = _commutant(seq, n)
    rng = np.random.default_rng(seed)
    for attempt in range(get_setting('BLOCK_RESAMPLES')):
        structure = _attempt(elements, dim, n, rng)
        if structure is None:
            logger.debug('degenerate commutant sample %d at level %d', attempt, n)
            continue
        worst = max(
            structure.off_pattern(_sample(elements, rng)) for _ in range(VALIDATION_SAMPLES)
        )
        if worst <= PATTERN_TOLERANCE:
            logger.info('%s at level %d splits into blocks %s', seq, n, list(structure.blocks))
            return structure
        logger.debug('sample %d failed validation with off-pattern mass %.2e', attempt, worst)
    raise DegenerateSample(
        f'commutant samples of {seq} at level {n} stayed degenerate; '
        'use an exact decomposition method'
    )


# PSD cones


@dataclass(frozen=True, eq=False)
class ReducedPSDCone:
    """
    K = ⊕ S^{m_λ}_+ with T_n mapping ⊕ svec(X_λ) to svec(Q (⊕ X_λ ⊗ I) Q^T).

    Full matrices are in orthonormal coordinates of V_n.
    """

    structure: BlockStructure
    cones: tuple
    t_matrix: sparse.csr_matrix

    @property
    def rows(self):
        return self.t_matrix.shape[1]

    def lift(self, z):
        return smat(np.asarray(self.t_matrix @ np.asarray(z, dtype=float)).ravel(),
                    self.structure.dim)

    def pullback(self, matrix):
        return np.concatenate([svec(x) for x in self.structure.pattern(matrix)])


def _presentation_threshold(seq):
    degrees = generation_degree(seq), presentation_degree(seq)
    if any(isinstance(d, Unknown) for d in degrees):
        return None
    return sum(degrees)


def reduce_psd_cone(seq, n, seed=0, structure=None):
    """
    Constant-sized description of the invariant PSD cone Sym²_+(V_n)^{G_n}.

    Returns:
        ReducedPSDCone whose block sizes stay fixed once n passes the
        generation plus presentation degree of ``seq``
    """
    threshold = _presentation_threshold(seq)
    if threshold is not None and n < threshold:
        logger.warning('level %d is below %d for %s; reduction is best-effort', n, threshold, seq)
    structure = structure or block_diagonalize(seq, n, seed)
    columns = []
    for (multiplicity, dimension), where in zip(structure.blocks, structure.slices()):
        basis = structure.q[:, where]
        for k in range(multiplicity * (multiplicity + 1) // 2):
            unit = np.zeros(multiplicity * (multiplicity + 1) // 2)
            unit[k] = 1.0
            full = basis @ np.kron(smat(unit, multiplicity), np.eye(dimension)) @ basis.T
            columns.append(svec(full))
    full_rows = structure.dim * (structure.dim + 1) // 2
    t_matrix = sparse.csr_matrix(
        np.column_stack(columns) if columns else np.zeros((full_rows, 0))
    )
    t_matrix.data[np.abs(t_matrix.data) < 1e-13] = 0.0
    t_matrix.eliminate_zeros()
    cones = tuple(ConeBlock(ConeKind.PSD, m) for m, _ in structure.blocks)
    return ReducedPSDCone(structure, cones, t_matrix)


# Invariant programs


@dataclass
class InvariantSDP:
    """
    Optimize ⟨C, X⟩ over X ⪰ 0 on V_n subject to ⟨A_i, X⟩ = b_i and
    ⟨F_j, X⟩ <= g_j. Matrices are symmetric in orthonormal coordinates; the
    objective must be invariant and each constraint list closed under the
    group up to matching right-hand sides.
    """

    seq: object
    level: int
    objective: np.ndarray
    constraints: list = field(default_factory=list)
    inequalities: list = field(default_factory=list)
    maximize: bool = False

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        dim = self.seq.dim(self.level)
        for matrix in [self.objective] + [a for a, _ in self.constraints + self.inequalities]:
            if np.shape(matrix) != (dim, dim):
                raise ValueError(f'SDP data must be {dim}×{dim}')

    @property
    def dim(self):
        return self.seq.dim(self.level)


@dataclass(frozen=True, eq=False)
class ReducedProgram:
    program: ConicProgram
    cone: ReducedPSDCone

    def lift(self, z):
        return self.cone.lift(z)


def _orthonormal_actions(seq, n):
    root = _orthonormal_scaling(seq, n)
    actions = generator_action(seq, n)

    def rescale(matrix):
        return (sparse.diags(root) @ sparse.csr_matrix(matrix) @ sparse.diags(1.0 / root)).toarray()

    return [rescale(g) for g in actions.discrete], [rescale(h) for h in actions.lie]


def _check_closed(rows, rhs, transforms, what):
    """Every transformed row must match some row with the same right-hand side."""
    if not len(rows):
        return
    rows = np.asarray(rows, dtype=float)
    scale = max(1.0, float(np.abs(rows).max()))
    for transform in transforms:
        for row, value in zip(rows, rhs):
            image = transform(row)
            distance = np.linalg.norm(rows - image, axis=1) + np.abs(np.asarray(rhs) - value)
            if distance.min() > INVARIANCE_TOLERANCE * scale * np.sqrt(len(row)):
                raise NonInvariantData(f'{what} are not closed under the group action')


def check_invariant_sdp(sdp):
    """
    Raises:
        NonInvariantData: the objective is not invariant or a constraint list
        is not a union of orbits
    """
    discrete, lie = _orthonormal_actions(sdp.seq, sdp.level)
    scale = max(1.0, np.linalg.norm(sdp.objective))
    for g in discrete:
        if np.linalg.norm(g @ sdp.objective @ g.T - sdp.objective) > INVARIANCE_TOLERANCE * scale:
            raise NonInvariantData('the objective is not invariant')
    transforms = [lambda row, g=g: svec(g @ smat(row) @ g.T) for g in discrete]
    for name, items in (('equality constraints', sdp.constraints),
                        ('inequality constraints', sdp.inequalities)):
        _check_closed([svec(a) for a, _ in items], [b for _, b in items], transforms, name)
        for h in lie:
            for a, _ in items:
                tolerance = INVARIANCE_TOLERANCE * max(1.0, np.linalg.norm(a))
                if np.linalg.norm(h @ a - a @ h) > tolerance:
                    raise NonInvariantData(f'{name} are not invariant under the Lie algebra')
    for h in lie:
        if np.linalg.norm(h @ sdp.objective - sdp.objective @ h) > INVARIANCE_TOLERANCE * scale:
            raise NonInvariantData('the objective is not invariant under the Lie algebra')


def _unique_rows(matrix, rhs):
    """Drop repeated rows and trivially satisfied zero rows."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    rhs = np.asarray(rhs, dtype=float)
    if not len(rhs):
        return matrix, rhs
    keep, seen = [], set()
    for i, (row, value) in enumerate(zip(matrix, rhs)):
        if not np.any(np.abs(row) > 1e-12) and abs(value) <= 1e-12:
            continue
        key = tuple(np.round(np.append(row, value), 9))
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return matrix[keep].reshape(len(keep), matrix.shape[1]), rhs[keep]


def _through(t_matrix, rows):
    """Rows r with r^T T for linear functionals on the full svec space."""
    return np.asarray(t_matrix.T @ np.array(rows).T).T


def _sdp_program(sdp, t_matrix, cones):
    """The SDP over variables z with svec(X) = T z and z in ``cones``."""
    nvars = t_matrix.shape[1]
    objective = t_matrix.T @ svec(sdp.objective)
    eq_matrix = eq_rhs = None
    if sdp.constraints:
        rows = _through(t_matrix, [svec(a) for a, _ in sdp.constraints])
        eq_matrix, eq_rhs = _unique_rows(rows, [b for _, b in sdp.constraints])
    g_blocks = [sparse.identity(nvars, format='csr')]
    h_blocks = [np.zeros(nvars)]
    blocks = list(cones)
    if sdp.inequalities:
        rows = _through(t_matrix, [svec(a) for a, _ in sdp.inequalities])
        rows, rhs = _unique_rows(rows, [b for _, b in sdp.inequalities])
        g_blocks.append(sparse.csr_matrix(-rows))
        h_blocks.append(rhs)
        blocks.append(ConeBlock(ConeKind.NONNEG, len(rhs)))
    return ConicProgram(
        np.asarray(objective).ravel(),
        sparse.vstack(g_blocks, format='csr'),
        np.concatenate(h_blocks),
        blocks,
        eq_matrix,
        eq_rhs,
        maximize=sdp.maximize,
    )


def full_program(sdp):
    """The SDP over the whole PSD cone of V_n in svec coordinates."""
    dim = sdp.dim
    identity = sparse.identity(dim * (dim + 1) // 2, format='csr')
    return _sdp_program(sdp, identity, [ConeBlock(ConeKind.PSD, dim)])


def reduce_program(sdp, seed=0, structure=None):
    """
    Restrict an invariant SDP to invariant X = T_n z with z in ⊕ S^{m_λ}_+.

    Symmetrizing an optimal X keeps it feasible and optimal, so the reduced
    program has the same optimal value.

    Raises:
        NonInvariantData: the data fail the invariance check
    """
    check_invariant_sdp(sdp)
    cone = reduce_psd_cone(sdp.seq, sdp.level, seed, structure)
    program = _sdp_program(sdp, cone.t_matrix, cone.cones)
    logger.info(
        'reduced an SDP of order %d to blocks %s with %d equalities',
        sdp.dim, [m for m, _ in cone.structure.blocks], program.eq_matrix.shape[0],
    )
    return ReducedProgram(program, cone)


# Orbits of finite index sets


@dataclass(frozen=True, eq=False)
class OrbitBasis:
    """
    Orbits of a finite point set under G_n.

    ``labels[i]`` is the orbit of point i and ``representatives[j]`` the
    index of the graded-lex minimal point of orbit j. Orbits are sorted by
    their representatives.
    """

    points: np.ndarray
    labels: np.ndarray
    representatives: np.ndarray
    sizes: np.ndarray
    permutations: list = field(default_factory=list)

    def __len__(self):
        return len(self.sizes)

    def indicators(self):
        """0/1 matrix whose columns are the orbit indicators."""
        count = len(self.labels)
        return sparse.csr_matrix(
            (np.ones(count), (np.arange(count), self.labels)), shape=(count, len(self))
        )

    def representative_points(self):
        return self.points[self.representatives]

    def members(self, orbit):
        return np.flatnonzero(self.labels == orbit)

    def average(self, values):
        values = np.asarray(values, dtype=float)
        return np.bincount(self.labels, weights=values, minlength=len(self)) / self.sizes

    def is_invariant(self, values, tol=INVARIANCE_TOLERANCE):
        values = np.asarray(values, dtype=float)
        spread = np.abs(values - self.average(values)[self.labels])
        return bool(np.all(spread <= tol * max(1.0, float(np.abs(values).max(initial=0.0)))))


def _key(point):
    return tuple(np.round(point, 9) + 0.0)


def _graded_key(point):
    return (float(np.abs(point).sum()), tuple(-np.abs(point)), tuple(-point))


def _point_generators(family, n):
    family = as_family(family)
    if not family.is_finite:
        raise UnsupportedGroup('orbits need a finite group family')
    return [g.toarray() for g in discrete_generators(family, n)]


def _orbits(points, generators, close):
    points = [np.asarray(p, dtype=float) for p in points]
    index = {}
    for i, point in enumerate(points):
        index.setdefault(_key(point), i)
    position, added = 0, 0
    while position < len(points):
        for g in generators:
            image = g @ points[position]
            if _key(image) not in index:
                if not close:
                    raise NonInvariantSupport(
                        f'point {points[position].tolist()} maps outside the set'
                    )
                index[_key(image)] = len(points)
                points.append(image)
                added += 1
        position += 1
    if added:
        logger.warning('added %d points to close the set under the group', added)

    width = len(points[0]) if points else 0
    points = np.array(points, dtype=float).reshape(len(points), width)
    count = len(points)
    permutations = [
        np.array([index[_key(g @ point)] for point in points], dtype=int) for g in generators
    ]
    if permutations and count:
        rows = np.concatenate([np.arange(count)] * len(permutations))
        cols = np.concatenate(permutations)
        graph = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(count, count))
        _, raw = connected_components(graph, directed=False)
    else:
        raw = np.arange(count)

    orbits = {}
    for i, label in enumerate(raw):
        orbits.setdefault(label, []).append(i)
    reps = {label: min(members, key=lambda i: _graded_key(points[i]))
            for label, members in orbits.items()}
    order = sorted(orbits, key=lambda label: _graded_key(points[reps[label]]))
    relabel = {label: j for j, label in enumerate(order)}
    labels = np.array([relabel[label] for label in raw], dtype=int)
    return OrbitBasis(
        points,
        labels,
        np.array([reps[label] for label in order], dtype=int),
        np.array([len(orbits[label]) for label in order], dtype=int),
        permutations,
    )


def orbit_basis(points, family, n, close=True):
    """
    Orbits of a finite set A_n ⊂ R^n under G_n.

    Args:
        points: array of shape (count, n)
        family: finite group family acting by signed permutations
        n: level
        close: add missing generator images with a warning instead of
            raising NonInvariantSupport

    Returns:
        OrbitBasis over the closed point set
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.size and points.shape[1] != n:
        raise ValueError(f'points must have {n} coordinates')
    return _orbits(points, _point_generators(family, n), close)


# Relative entropy cones


def relative_entropy(nu, c):
    """Σ ν_α log(ν_α / c_α)."""
    return float(np.sum(rel_entr(np.asarray(nu, dtype=float), np.asarray(c, dtype=float))))


@dataclass(frozen=True, eq=False)
class ReducedRelativeEntropy:
    """
    RE^{G_n} = T_n(K) with K the relative entropy cone on R^M ⊕ R^M ⊕ R
    weighted by orbit sizes and T_n(ν̂, ĉ, t) = (Σ ν̂_j 𝟙_j, Σ ĉ_j 𝟙_j, t).
    """

    orbits: OrbitBasis

    @property
    def cone(self):
        return ConeBlock(ConeKind.RELENT, len(self.orbits), tuple(self.orbits.sizes))

    def t_matrix(self):
        indicators = self.orbits.indicators()
        return sparse.block_diag([indicators, indicators, sparse.identity(1)], format='csr')

    def lift(self, nu_hat, c_hat):
        indicators = self.orbits.indicators()
        nu_hat = np.asarray(nu_hat, dtype=float)
        c_hat = np.asarray(c_hat, dtype=float)
        return indicators @ nu_hat, indicators @ c_hat

    def reduce(self, nu, c):
        """
        Raises:
            NonInvariantData: ν or c is not constant on orbits
        """
        if not (self.orbits.is_invariant(nu) and self.orbits.is_invariant(c)):
            raise NonInvariantData('ν and c must be constant on orbits')
        return self.orbits.average(nu), self.orbits.average(c)

    def divergence(self, nu_hat, c_hat):
        """Σ_j |orbit j| ν̂_j log(ν̂_j / ĉ_j)."""
        return float(np.sum(self.orbits.sizes * rel_entr(np.asarray(nu_hat, dtype=float),
                                                          np.asarray(c_hat, dtype=float))))


def reduce_relative_entropy(points, family, n):
    return ReducedRelativeEntropy(orbit_basis(points, family, n))


@dataclass
class InvariantREProgram:
    """
    min t over (ν, c, t) in the relative entropy cone of A_n subject to
    E (ν, c) = f, with the rows of E closed under the induced permutations.
    """

    points: np.ndarray
    family: object
    level: int
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray


def _re_program(matrix, rhs, t_matrix, cone):
    nvars = t_matrix.shape[1]
    eq = np.asarray(matrix, dtype=float) @ t_matrix[:-1].toarray() if len(rhs) else None
    objective = np.zeros(nvars)
    objective[-1] = 1.0
    eq_matrix, eq_rhs = _unique_rows(eq, rhs) if eq is not None else (None, None)
    return ConicProgram(
        objective, sparse.identity(nvars, format='csr'), np.zeros(nvars), [cone], eq_matrix, eq_rhs
    )


def full_re_program(problem):
    orbits = orbit_basis(problem.points, problem.family, problem.level, close=False)
    count = len(orbits.labels)
    return _re_program(
        problem.eq_matrix, problem.eq_rhs, sparse.identity(2 * count + 1, format='csr'),
        ConeBlock(ConeKind.RELENT, count),
    )


def reduce_re_program(problem):
    """
    Raises:
        NonInvariantSupport: A_n is not closed under the group
        NonInvariantData: the rows of E are not closed under the group
    """
    reduced = ReducedRelativeEntropy(
        orbit_basis(problem.points, problem.family, problem.level, close=False)
    )
    count = len(reduced.orbits.labels)
    transforms = []
    for perm in reduced.orbits.permutations:
        both = np.concatenate([perm, perm + count])

        def transform(row, both=both):
            image = np.zeros_like(row)
            image[both] = row
            return image

        transforms.append(transform)
    _check_closed(problem.eq_matrix, problem.eq_rhs, transforms, 'relative entropy constraints')
    return _re_program(problem.eq_matrix, problem.eq_rhs, reduced.t_matrix(), reduced.cone), reduced


# SAGE cones


@dataclass(frozen=True, eq=False)
class SageProgram:
    """Feasibility program for membership of (c_A, c_B) in SAGE_{A,B}."""

    program: ConicProgram
    a_orbits: OrbitBasis
    b_orbits: OrbitBasis
    reduced: bool


def _stabilizer_classes(b_points, beta_index, a_points, generators):
    """Stab(β)-orbits on A as (point indices, weight) pairs, via G-orbits of pairs."""
    pairs = np.array([np.concatenate([b, a]) for b in b_points for a in a_points])
    doubled = [linalg.block_diag(g, g) for g in generators]
    pair_orbits = _orbits(pairs, doubled, close=False)
    count = len(a_points)
    own = pair_orbits.labels[beta_index * count:(beta_index + 1) * count]
    classes = []
    for label in sorted(set(own)):
        members = np.flatnonzero(own == label)
        classes.append(members)
    return classes


def _sage_program(a_points, b_points, a_coefficients, b_coefficients, family, n, reduced):
    a_points = np.atleast_2d(np.asarray(a_points, dtype=float)).reshape(-1, n)
    b_points = np.atleast_2d(np.asarray(b_points, dtype=float)).reshape(-1, n)
    a_coefficients = np.asarray(a_coefficients, dtype=float).ravel()
    b_coefficients = np.asarray(b_coefficients, dtype=float).ravel()
    if len(a_coefficients) != len(a_points) or len(b_coefficients) != len(b_points):
        raise ValueError('one coefficient per support point is needed')
    if {_key(p) for p in a_points} & {_key(p) for p in b_points}:
        raise ValueError('A and B must be disjoint')

    generators = _point_generators(family, n)
    a_orbits = _orbits(a_points, generators, close=False)
    b_orbits = _orbits(b_points, generators, close=False)
    if not (a_orbits.is_invariant(a_coefficients) and b_orbits.is_invariant(b_coefficients)):
        raise NonInvariantData('coefficients must be constant on orbits')
    c_a = a_orbits.average(a_coefficients)
    c_b = b_orbits.average(b_coefficients)

    certificates = []
    for j in range(len(b_orbits)):
        members = b_orbits.members(j)
        beta_index = int(np.flatnonzero(members == b_orbits.representatives[j])[0])
        classes = _stabilizer_classes(b_points[members], beta_index, a_points, generators)
        certificates.append((j, b_points[b_orbits.representatives[j]], classes))

    nvars = sum(2 * len(classes) for _, _, classes in certificates)
    dummy = nvars == 0
    nvars = max(nvars, 1)
    g_blocks, h_blocks, blocks = [], [], []
    eq_rows, aggregate = [], np.zeros((len(a_orbits), nvars))
    column = 0
    for j, beta, classes in certificates:
        size = len(classes)
        nu = np.arange(column, column + size)
        c = np.arange(column + size, column + 2 * size)
        column += 2 * size
        rows = sparse.csr_matrix(
            (np.concatenate([np.ones(size), np.full(size, np.e)]),
             (np.arange(2 * size), np.concatenate([nu, c]))),
            shape=(2 * size + 1, nvars),
        )
        g_blocks.append(rows)
        h_blocks.append(np.concatenate([np.zeros(2 * size), [c_b[j]]]))
        weights = tuple(len(members) for members in classes)
        blocks.append(ConeBlock(ConeKind.RELENT, size, weights))

        moment = np.zeros((n, nvars))
        for k, members in enumerate(classes):
            moment[:, nu[k]] = (a_points[members] - beta).sum(axis=0)
            orbit = a_orbits.labels[members[0]]
            aggregate[orbit, c[k]] -= b_orbits.sizes[j] * len(members) / a_orbits.sizes[orbit]
        eq_rows.append(moment)

    g_blocks.append(sparse.csr_matrix(aggregate))
    h_blocks.append(c_a)
    blocks.append(ConeBlock(ConeKind.NONNEG, len(a_orbits)))
    eq_matrix = eq_rhs = None
    if eq_rows:
        stacked = np.vstack(eq_rows)
        eq_matrix, eq_rhs = _unique_rows(stacked, np.zeros(len(stacked)))
        if not len(eq_rhs):
            eq_matrix = eq_rhs = None
    program = ConicProgram(
        np.zeros(nvars), sparse.vstack(g_blocks, format='csr'), np.concatenate(h_blocks), blocks,
        eq_matrix, eq_rhs,
    )
    if dummy:
        logger.debug('empty B: SAGE membership reduces to nonnegative coefficients')
    return SageProgram(program, a_orbits, b_orbits, reduced)


def full_sage(a_points, b_points, a_coefficients, b_coefficients, n):
    """SAGE membership through one relative entropy certificate per β ∈ B."""
    return _sage_program(
        a_points, b_points, a_coefficients, b_coefficients, GroupFamily.TRIVIAL, n, False
    )


def reduce_sage(a_points, b_points, family, n, a_coefficients, b_coefficients):
    """
    Symmetry-reduced SAGE membership for invariant coefficients.

    One certificate per B-orbit representative β, invariant under Stab(β),
    with the moment conditions Σ ν_α (α − β) = 0 and the aggregate
    c_A − Σ_β c^{(β)} >= 0 imposed on orbit representatives.

    Raises:
        NonInvariantSupport: A_n or B_n is not closed under the group
        NonInvariantData: coefficients are not constant on orbits
    """
    return _sage_program(a_points, b_points, a_coefficients, b_coefficients, family, n, True)


def sage_membership(sage):
    """
    Raises:
        Indeterminate: the solver failed without a certificate either way
    """
    try:
        solve(sage.program)
    except Infeasible:
        return False
    except NumericalFailure as exc:
        raise Indeterminate(f'SAGE membership undecided: {exc}') from exc
    return True


@dataclass
class SageInstance:
    """A symmetric signomial: coefficients on A_n and on the B_n terms that may be negative."""

    family: object
    level: int
    a_points: np.ndarray
    b_points: np.ndarray
    a_coefficients: np.ndarray
    b_coefficients: np.ndarray

    def full(self):
        return full_sage(
            self.a_points, self.b_points, self.a_coefficients, self.b_coefficients, self.level
        )

    def reduced(self):
        return reduce_sage(
            self.a_points, self.b_points, self.family, self.level,
            self.a_coefficients, self.b_coefficients,
        )
