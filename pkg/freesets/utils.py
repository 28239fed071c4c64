import logging
import os

from django.conf import settings

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph
from scipy.sparse import linalg as splinalg

logger = logging.getLogger(__name__)

DEFAULTS = {
    'SOLVER': 'CLARABEL',
    'RANK_TOLERANCE': 1e-8,
    'RESIDUAL_TOLERANCE': 1e-8,
    'LSQR_TOLERANCE': 1e-10,
    'DENSE_NULLSPACE_COLUMNS': 200_000,
    'GROUP_ENUMERATION_LIMIT': 5000,
    'MEMBERSHIP_TOLERANCE': 1e-7,
    'LAMBDA_MIN': 1e-3,
    'RESTARTS': 100,
    'MAX_ALTERNATIONS': 50,
    'STALL_TOLERANCE': 1e-6,
    'STALL_ROUNDS': 5,
    'EIGEN_GAP': 1e-6,
    'BLOCK_RESAMPLES': 10,
}


def get_setting(name):
    """
    Read a numerical setting from settings.FREESETS, falling back to defaults.

    The library is usable without a configured Django project; in that case
    the defaults above apply.

    Args:
        name: Key of the FREESETS settings dict

    Returns:
        The configured value
    """
    if settings.configured or os.environ.get('DJANGO_SETTINGS_MODULE'):
        return getattr(settings, 'FREESETS', {}).get(name, DEFAULTS[name])
    return DEFAULTS[name]


def as_signed_permutation(matrix):
    """
    Decompose a square matrix with one ±1 entry per column.

    Args:
        matrix: scipy sparse or dense square matrix

    Returns:
        tuple: (perm, sign) with matrix @ e_j = sign[j] * e_{perm[j]}, or None
        when the matrix is not a signed permutation
    """
    mat = sparse.csc_matrix(matrix)
    mat.eliminate_zeros()
    size = mat.shape[0]
    if mat.shape[1] != size or mat.nnz != size:
        return None
    if not np.array_equal(np.diff(mat.indptr), np.ones(size, dtype=mat.indptr.dtype)):
        return None
    if not np.all(np.abs(np.abs(mat.data) - 1.0) <= 1e-12):
        return None
    perm = mat.indices.astype(np.int64)
    if np.unique(perm).size != size:
        return None
    return perm, np.sign(mat.data).astype(np.int8)


def signed_permutation_matrix(perm, sign):
    size = len(perm)
    return sparse.csr_matrix(
        (np.asarray(sign, dtype=float), (np.asarray(perm), np.arange(size))), shape=(size, size)
    )


def kron_signed_permutations(first, second):
    """Signed permutation of kron(P1, P2) from the two factors."""
    perm_a, sign_a = first
    perm_b, sign_b = second
    size_b = len(perm_b)
    perm = (perm_a[:, None] * size_b + perm_b[None, :]).ravel()
    sign = (sign_a[:, None] * sign_b[None, :]).ravel()
    return perm, sign


def signed_orbit_basis(actions, weights):
    """
    Basis of the vectors fixed by a group of signed permutations.

    Coordinates are linked into orbits by following each generator; a
    coordinate whose orbit reaches its own negative is forced to zero. Each
    surviving orbit contributes its signed indicator vector, normalized in
    the diagonal metric given by ``weights``.

    Args:
        actions: list of (perm, sign) pairs, one per generator
        weights: metric weights of the coordinates

    Returns:
        scipy.sparse.csc_matrix: columns form an orthonormal basis of the fixed space
    """
    weights = np.asarray(weights, dtype=float)
    size = len(weights)
    if size == 0:
        return sparse.csc_matrix((0, 0))
    if not actions:
        scale = 1.0 / np.sqrt(weights)
        return sparse.csc_matrix(sparse.diags(scale))

    nodes = np.arange(size)
    rows, cols = [], []
    for perm, sign in actions:
        target = perm + np.where(sign > 0, 0, size)
        rows.extend([nodes, nodes + size])
        cols.extend([target, (target + size) % (2 * size)])
    graph = sparse.csr_matrix(
        (np.ones(sum(len(r) for r in rows)), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * size, 2 * size),
    )
    count, labels = csgraph.connected_components(graph, directed=True, connection='weak')
    plus, minus = labels[:size], labels[size:]

    first = np.full(count, size, dtype=np.int64)
    np.minimum.at(first, plus, nodes)
    valid = plus != minus
    chosen = np.where(first[plus] <= first[minus], plus, minus)
    signs = np.where(chosen == plus, 1.0, -1.0)

    kept = np.unique(chosen[valid])
    kept = kept[np.argsort(first[kept])]
    column_of = np.full(count, -1, dtype=np.int64)
    column_of[kept] = np.arange(len(kept))

    rows = nodes[valid]
    cols = column_of[chosen[valid]]
    basis = sparse.csc_matrix(
        (signs[valid], (rows, cols)), shape=(size, len(kept))
    )
    norms = np.sqrt(np.asarray(basis.multiply(basis).T @ weights).ravel())
    return sparse.csc_matrix(basis @ sparse.diags(1.0 / norms))


def nullspace(matrix, tol=None, seed=0):
    """
    Orthonormal basis (Euclidean) of the kernel of a sparse or dense matrix.

    Columns that are identically zero give unit vectors directly. Up to
    DENSE_NULLSPACE_COLUMNS remaining columns, the matrix is split into
    blocks that share no row or column and each block goes through a chunked
    QR followed by an SVD; above that, through a randomized LSQR projection.

    Args:
        matrix: constraint matrix with shape (rows, cols)
        tol: relative singular value threshold (defaults to RANK_TOLERANCE)
        seed: seed for the randomized path

    Returns:
        numpy.ndarray: (cols, k) orthonormal kernel basis
    """
    tol = get_setting('RANK_TOLERANCE') if tol is None else tol
    mat = sparse.csc_matrix(matrix)
    cols = mat.shape[1]
    if cols == 0:
        return np.zeros((0, 0))

    col_norms = np.sqrt(np.asarray(mat.multiply(mat).sum(axis=0)).ravel())
    scale = col_norms.max() if cols else 0.0
    if scale == 0.0:
        return np.eye(cols)
    zero_cols = np.flatnonzero(col_norms <= 1e-14 * scale)
    live = np.flatnonzero(col_norms > 1e-14 * scale)
    sub = mat[:, live]
    sub.eliminate_zeros()

    if len(live) <= get_setting('DENSE_NULLSPACE_COLUMNS'):
        kernel = _sparse_nullspace(sub, tol)
    else:
        kernel = _randomized_nullspace(sub, tol, seed)

    result = np.zeros((cols, len(zero_cols) + kernel.shape[1]))
    result[zero_cols, np.arange(len(zero_cols))] = 1.0
    result[np.ix_(live, np.arange(len(zero_cols), result.shape[1]))] = kernel
    return result


def _sparse_nullspace(mat, tol):
    rows, cols = mat.shape
    coo = mat.tocoo()
    graph = sparse.csr_matrix(
        (np.ones(coo.nnz), (coo.row, rows + coo.col)), shape=(rows + cols, rows + cols)
    )
    _, labels = csgraph.connected_components(graph, directed=False)
    column_labels = labels[rows:]
    order = np.argsort(column_labels, kind='stable')
    splits = np.flatnonzero(np.diff(column_labels[order])) + 1
    mat = mat.tocsc()
    pieces = []
    for members in np.split(order, splits):
        kernel = _dense_nullspace(mat[:, members], tol)
        if kernel.shape[1]:
            piece = np.zeros((cols, kernel.shape[1]))
            piece[members] = kernel
            pieces.append(piece)
    if not pieces:
        return np.zeros((cols, 0))
    logger.debug('nullspace over %d columns split into %d blocks', cols, len(splits) + 1)
    return np.hstack(pieces)


def _dense_nullspace(mat, tol):
    cols = mat.shape[1]
    nonzero_rows = np.unique(mat.tocoo().row)
    mat = mat.tocsr()[nonzero_rows]
    chunk = max(cols, 1)
    reduced = np.zeros((0, cols))
    for start in range(0, mat.shape[0], chunk):
        block = mat[start:start + chunk].toarray()
        stacked = np.vstack([reduced, block])
        if stacked.shape[0] > cols:
            reduced = linalg.qr(stacked, mode='r')[0][:cols]
        else:
            reduced = stacked
    if reduced.shape[0] == 0:
        return np.eye(cols)
    return linalg.null_space(reduced, rcond=tol)


def _randomized_nullspace(mat, tol, seed):
    rng = np.random.default_rng(seed)
    cols = mat.shape[1]
    lsqr_tol = get_setting('LSQR_TOLERANCE')
    found = np.zeros((cols, 0))
    stalls = 0
    while stalls < 3:
        batch = []
        for _ in range(8):
            z = rng.standard_normal(cols)
            correction = splinalg.lsqr(mat, mat @ z, atol=lsqr_tol, btol=lsqr_tol)[0]
            batch.append(z - correction)
        candidate = np.column_stack([found] + batch)
        u, s, _ = linalg.svd(candidate, full_matrices=False)
        rank = int(np.sum(s > tol * s.max())) if s.size else 0
        if rank <= found.shape[1]:
            stalls += 1
        else:
            stalls = 0
        found = u[:, :rank]
    logger.debug('randomized nullspace found %d vectors over %d columns', found.shape[1], cols)
    return found


def svec(matrix):
    """Scaled upper triangle (row-major) with sqrt(2) on off-diagonal entries."""
    matrix = np.asarray(matrix, dtype=float)
    rows, cols = np.triu_indices(matrix.shape[0])
    return np.where(rows == cols, 1.0, np.sqrt(2.0)) * matrix[rows, cols]


def smat(vector, size=None):
    vector = np.asarray(vector, dtype=float)
    if size is None:
        size = triangular_side(len(vector))
    rows, cols = np.triu_indices(size)
    values = np.where(rows == cols, 1.0, 1.0 / np.sqrt(2.0)) * vector
    matrix = np.zeros((size, size))
    matrix[rows, cols] = values
    matrix[cols, rows] = values
    return matrix


def sym_entries(matrix):
    """Upper-triangle entries of a symmetric matrix in the canonical pair order."""
    matrix = np.asarray(matrix, dtype=float)
    return matrix[np.triu_indices(matrix.shape[0])]


def entries_to_sym(vector, size=None):
    vector = np.asarray(vector, dtype=float)
    if size is None:
        size = triangular_side(len(vector))
    rows, cols = np.triu_indices(size)
    matrix = np.zeros((size, size))
    matrix[rows, cols] = vector
    matrix[cols, rows] = vector
    return matrix


def triangular_side(length):
    side = int(round((np.sqrt(8 * length + 1) - 1) / 2))
    if side * (side + 1) // 2 != length:
        raise ValueError(f'{length} is not a triangular number')
    return side


def svec_to_smat_operator(size):
    """Sparse map from svec coordinates to the column-major vectorized matrix."""
    rows, cols = np.triu_indices(size)
    scale = np.where(rows == cols, 1.0, 1.0 / np.sqrt(2.0))
    index = np.arange(len(rows))
    upper = rows + cols * size
    lower = cols + rows * size
    off = rows != cols
    return sparse.csr_matrix(
        (
            np.concatenate([scale, scale[off]]),
            (np.concatenate([upper, lower[off]]), np.concatenate([index, index[off]])),
        ),
        shape=(size * size, len(rows)),
    )


def principal_angle_gap(first, second):
    """Largest principal angle (radians) between two column spans."""
    if first.shape[1] != second.shape[1]:
        return np.pi / 2
    if first.shape[1] == 0:
        return 0.0
    return float(np.max(linalg.subspace_angles(first, second)))
