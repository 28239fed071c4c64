"""
Constructors for the free descriptions used throughout the test suite and
the ``--fixture`` option of the commands.

Operators are written at level n0 in canonical entry coordinates: a
symmetric matrix X is stored through its upper-triangle entries X_ij.
"""

import numpy as np

from .descriptions import DescriptionFlags, FreeDescription, UExtension
from .exceptions import InvalidDescription
from .operators import EquivariantOperator
from .sequences import parse_sequence
from .solver import ConeSpec
from .utils import sym_entries

ALL_MORPHISMS = DescriptionFlags(a_morphism=True, a_adjoint=True, b_morphism=True, b_adjoint=True)
A_MORPHISM = DescriptionFlags(a_morphism=True)
A_BOTH = DescriptionFlags(a_morphism=True, a_adjoint=True)


def _pair_index(size):
    rows, cols = np.triu_indices(size)
    return {(int(i), int(j)): k for k, (i, j) in enumerate(zip(rows, cols))}


def _symmetric_unit(size, i, j):
    unit = np.zeros((size, size))
    unit[i, j] = unit[j, i] = 1.0
    return unit


def build(name, v, w, u, cone, a, b, offset, n0, flags=None, regularization=0.0):
    """A FreeDescription from sequence expressions and dense level-n0 data."""
    seq_v, seq_w, seq_u = parse_sequence(v), parse_sequence(w), parse_sequence(u)
    b = np.zeros((seq_u.dim(n0), seq_w.dim(n0))) if b is None else b
    return FreeDescription(
        seq_v,
        seq_w,
        seq_u,
        ConeSpec.parse(cone),
        EquivariantOperator(seq_v, seq_u, n0, n0, a),
        EquivariantOperator(seq_w, seq_u, n0, n0, b),
        offset,
        n0,
        flags or DescriptionFlags(),
        regularization,
        name,
    )


def simplex(n0=2):
    """Δ^{n-1} = {x >= 0, 1^T x = 1}."""
    a = np.vstack([np.eye(n0), np.ones((1, n0))])
    u = np.concatenate([np.zeros(n0), [-1.0]])
    return build(
        'simplex', 'vec(sym)', 'fixed(0)', 'sum(vec(sym), fixed(1))', 'nonneg(n) + zero(1)',
        a, None, u, n0, A_MORPHISM,
    )


def l2_ball(n0=2):
    """The unit Euclidean ball as [[1, x^T], [x, I]] ⪰ 0."""
    pairs = _pair_index(n0 + 1)
    a = np.zeros((len(pairs), n0))
    for i in range(n0):
        a[pairs[0, i + 1], i] = 1.0
    flags = DescriptionFlags(a_morphism=True, a_adjoint=True, u_extension=UExtension.IDENTITY)
    return build(
        'l2_ball', 'vec(bsym)', 'fixed(0)', 'moment(1, vec(bsym))', 'psd(n+1)',
        a, None, sym_entries(np.eye(n0 + 1)), n0, flags,
    )


def l1_ball(n0=2):
    """The cross-polytope: y >= ±x and 1^T y <= 1."""
    a = np.vstack([np.eye(n0), -np.eye(n0), np.zeros((1, n0))])
    b = np.vstack([np.eye(n0), np.eye(n0), -np.ones((1, n0))])
    u = np.zeros(2 * n0 + 1)
    u[-1] = 1.0
    return build(
        'l1_ball', 'vec(bsym)', 'pvec(bsym)', 'l1lift(bsym)', 'nonneg(2n+1)',
        a, b, u, n0, DescriptionFlags(a_morphism=True, a_adjoint=True, b_morphism=True),
    )


CUBE_SPACES = {
    'v': 'vec(bsym)',
    'w': 'sum(pvec(bsym), fixed(1))',
    'u': 'sum(l1lift(bsym), pvec(bsym))',
    'cone': 'nonneg(2n+1) + zero(n)',
}


def _cube_a(n0):
    return np.vstack([np.eye(n0), -np.eye(n0), np.zeros((1 + n0, n0))])


def cube(n0=2):
    """[-1, 1]^n with y >= ±x and y = 1; compatible in both senses."""
    b = np.zeros((3 * n0 + 1, n0 + 1))
    b[:n0, :n0] = np.eye(n0)
    b[n0:2 * n0, :n0] = np.eye(n0)
    b[2 * n0 + 1:, :n0] = np.eye(n0)
    u = np.concatenate([np.zeros(2 * n0 + 1), -np.ones(n0)])
    return build(
        'cube', CUBE_SPACES['v'], CUBE_SPACES['w'], CUBE_SPACES['u'], CUBE_SPACES['cone'],
        _cube_a(n0), b, u, n0, ALL_MORPHISMS,
    )


def bad_cube(n0=2):
    """
    A description equal to [-1, 1]^2 at n=2 whose extensions are
    3/(2n-1) [-1, 1]^n: B is equivariant but not a morphism.
    """
    b = np.zeros((3 * n0 + 1, n0 + 1))
    b[:n0, :n0] = np.eye(n0)
    b[n0:2 * n0, :n0] = np.eye(n0)
    b[2 * n0, :] = -1.0
    b[2 * n0 + 1:, :n0] = np.eye(n0) - np.ones((n0, n0))
    b[2 * n0 + 1:, n0] = 1.0
    u = np.zeros(3 * n0 + 1)
    u[2 * n0] = 3.0
    return build(
        'bad_cube', CUBE_SPACES['v'], CUBE_SPACES['w'], CUBE_SPACES['u'], CUBE_SPACES['cone'],
        _cube_a(n0), b, u, n0, A_BOTH,
    )


def _diagonal_rows(n):
    pairs = _pair_index(n)
    rows = np.zeros((n, len(pairs)))
    for i in range(n):
        rows[i, pairs[i, i]] = 1.0
    return rows


def elliptope(n0=4):
    """Correlation matrices {X ⪰ 0, diag X = 1}."""
    dim = n0 * (n0 + 1) // 2
    a = np.vstack([np.eye(dim), _diagonal_rows(n0)])
    u = np.concatenate([np.zeros(dim), -np.ones(n0)])
    return build(
        'elliptope', 'symmat(sym)', 'fixed(0)', 'sum(symmat(sym), vec(sym))', 'psd(n) + zero(n)',
        a, None, u, n0, A_BOTH,
    )


def inverse_stability(n0=4):
    """Doubly nonnegative matrices with 1^T X 1 = 1."""
    dim = n0 * (n0 + 1) // 2
    rows, cols = np.triu_indices(n0)
    total = np.where(rows == cols, 1.0, 2.0).reshape(1, -1)
    a = np.vstack([np.eye(dim), np.eye(dim), total])
    u = np.concatenate([np.zeros(2 * dim), [-1.0]])
    return build(
        'inverse_stability', 'symmat(sym)', 'fixed(0)',
        'sum(symmat(sym), symmat(sym), fixed(1))', 'psd(n) + nonneg(C(n+1,2)) + zero(1)',
        a, None, u, n0, A_MORPHISM,
    )


def spectraplex(n0=4):
    """Density matrices {X ⪰ 0, tr X = 1}, invariant under the orthogonal group."""
    dim = n0 * (n0 + 1) // 2
    trace = _diagonal_rows(n0).sum(axis=0, keepdims=True)
    a = np.vstack([np.eye(dim), trace])
    u = np.concatenate([np.zeros(dim), [-1.0]])
    return build(
        'spectraplex', 'symmat(orth)', 'fixed(0)', 'sum(symmat(orth), fixed(1))',
        'psd(n) + zero(1)', a, None, u, n0, A_MORPHISM,
    )


def _check_spectrum(values, multiplicities):
    values = np.asarray(values, dtype=float)
    multiplicities = np.asarray(multiplicities, dtype=int)
    if values.ndim != 1 or len(values) == 0 or len(values) != len(multiplicities):
        raise InvalidDescription('values and multiplicities must be nonempty and of equal length')
    if np.any(multiplicities < 1):
        raise InvalidDescription('multiplicities must be positive')
    return values, multiplicities, int(multiplicities.sum())


def permutahedron(values, multiplicities, n0=1):
    """
    conv{P λ_n : P a permutation}, where λ_n repeats values[j] exactly
    multiplicities[j] * 2^n times, as {x = M λ̂ : M >= 0 with prescribed
    row and column sums}.
    """
    values, multiplicities, m = _check_spectrum(values, multiplicities)
    q = len(values)
    size = m * 2**n0
    column = f'dvec(sym, {m})' if m > 1 else 'dvec(sym)'
    w = f'sum({", ".join([column] * q)})'
    u_seq = f'sum({", ".join([column] * q)}, {column}, {column}, fixed({q}))'

    b = np.zeros((q * size + 2 * size + q, q * size))
    b[:q * size] = np.eye(q * size)
    for j, value in enumerate(values):
        block = slice(j * size, (j + 1) * size)
        b[q * size:(q + 1) * size, block] = value * np.eye(size)
        b[(q + 1) * size:(q + 2) * size, block] = np.eye(size)
        b[(q + 2) * size + j, block] = 1.0 / size
    a = np.zeros((b.shape[0], size))
    a[q * size:(q + 1) * size] = -np.eye(size)
    u = np.concatenate(
        [np.zeros((q + 1) * size), -np.ones(size), -multiplicities / m]
    )
    cone = f'nonneg({q * m}*2^n) + zero({m}*2^n) + zero({m}*2^n) + zero({q})'
    return build('permutahedron', column, w, u_seq, cone, a, b, u, n0)


def schur_horn(values, multiplicities, n0=1):
    """
    conv{Q Λ_n Q^T : Q orthogonal}, the symmetric matrices whose spectrum
    is majorized by λ_n, as {X = Σ_j λ̂_j P_j : P_j ⪰ 0, Σ_j P_j = I,
    tr P_j fixed}.
    """
    values, multiplicities, m = _check_spectrum(values, multiplicities)
    q = len(values)
    side = m * 2**n0
    pairs = _pair_index(side)
    dim = len(pairs)
    block = f'dsymmat(orth, {m})' if m > 1 else 'dsymmat(orth)'
    w = f'sum({", ".join([block] * q)})'
    u_seq = f'sum({", ".join([block] * q)}, {block}, {block}, fixed({q}))'

    b = np.zeros((q * dim + 2 * dim + q, q * dim))
    b[:q * dim] = np.eye(q * dim)
    diagonal = [pairs[i, i] for i in range(side)]
    for j, value in enumerate(values):
        columns = slice(j * dim, (j + 1) * dim)
        b[q * dim:(q + 1) * dim, columns] = value * np.eye(dim)
        b[(q + 1) * dim:(q + 2) * dim, columns] = np.eye(dim)
        b[(q + 2) * dim + j, [j * dim + k for k in diagonal]] = 1.0 / side
    a = np.zeros((b.shape[0], dim))
    a[q * dim:(q + 1) * dim] = -np.eye(dim)
    u = np.concatenate(
        [np.zeros((q + 1) * dim), -sym_entries(np.eye(side)), -multiplicities / m]
    )
    psd = ' + '.join([f'psd({m}*2^n)'] * q)
    cone = f'{psd} + zero(C({m}*2^n+1,2)) + zero(C({m}*2^n+1,2)) + zero({q})'
    return build('schur_horn', block, w, u_seq, cone, a, b, u, n0)


def free_spectrahedron(pencil, constant=None, n0=4):
    """
    {(X_1, ..., X_d) : L_0 ⊗ I + Σ_i L_i ⊗ X_i ⪰ 0} for symmetric k×k
    matrices L_i; L_0 defaults to the identity.
    """
    pencil = [np.asarray(matrix, dtype=float) for matrix in pencil]
    if not pencil:
        raise InvalidDescription('a free spectrahedron needs at least one pencil matrix')
    k = pencil[0].shape[0]
    for matrix in pencil:
        if matrix.shape != (k, k) or not np.allclose(matrix, matrix.T):
            raise InvalidDescription('pencil matrices must be symmetric and of equal size')
    monic = constant is None
    constant = np.eye(k) if monic else np.asarray(constant, dtype=float)

    pairs = _pair_index(n0)
    columns = []
    for matrix in pencil:
        for (i, j) in pairs:
            columns.append(sym_entries(np.kron(matrix, _symmetric_unit(n0, i, j))))
    a = np.column_stack(columns)
    v = 'symmat(orth)' if len(pencil) == 1 else f'sum({", ".join(["symmat(orth)"] * len(pencil))})'
    flags = DescriptionFlags(
        a_morphism=True,
        a_adjoint=True,
        u_extension=UExtension.IDENTITY if monic else UExtension.EXTEND,
    )
    return build(
        'free_spectrahedron', v, 'fixed(0)', f'sympow(2, tensor(fixed({k}), vec(orth)))',
        f'psd({k}n)', a, None, sym_entries(np.kron(constant, np.eye(n0))), n0, flags,
    )


def spectral_norm_ball(n0=4):
    """{X : ‖X‖ <= 1} as the free spectrahedron of diag(1, -1)."""
    return free_spectrahedron([np.diag([1.0, -1.0])], n0=n0)


FIXTURES = {
    'simplex': simplex,
    'l2_ball': l2_ball,
    'l1_ball': l1_ball,
    'cube': cube,
    'bad_cube': bad_cube,
    'elliptope': elliptope,
    'inverse_stability': inverse_stability,
    'spectraplex': spectraplex,
    'spectral_norm_ball': spectral_norm_ball,
}


def get_fixture(name):
    try:
        return FIXTURES[name]()
    except KeyError:
        raise InvalidDescription(
            f'unknown fixture {name!r}; choose from {", ".join(sorted(FIXTURES))}'
        ) from None
