"""
Group families acting on the base spaces of consistent sequences.

Every finite family is generated by signed permutation matrices, so group
elements are stored as (perm, sign) pairs where ``g @ e_j = sign[j] e_{perm[j]}``.
"""

import logging
from collections import deque
from enum import Enum
from math import factorial

import numpy as np
from scipy import sparse
from scipy.stats import ortho_group

from .exceptions import UnsupportedGroup
from .utils import as_signed_permutation, get_setting, signed_permutation_matrix

logger = logging.getLogger(__name__)


class GroupFamily(str, Enum):
    SYM = 'sym'
    SIGNED_SYM = 'bsym'
    EVEN_SIGNED_SYM = 'dsym'
    CYCLIC = 'cyc'
    ORTHOGONAL = 'orth'
    TRIVIAL = 'triv'

    @property
    def is_finite(self):
        return self is not GroupFamily.ORTHOGONAL

    @property
    def is_signed_sym_type(self):
        """Families covered by the generation and presentation degree calculus."""
        return self in (GroupFamily.SYM, GroupFamily.SIGNED_SYM, GroupFamily.EVEN_SIGNED_SYM)


def as_family(value):
    if isinstance(value, GroupFamily):
        return value
    try:
        return GroupFamily(str(value).lower())
    except ValueError:
        raise UnsupportedGroup(f'unknown group family {value!r}') from None


def _transposition(n):
    perm = np.arange(n)
    perm[[0, 1]] = [1, 0]
    return perm, np.ones(n, dtype=np.int8)


def _cycle(n):
    return (np.arange(n) + 1) % n, np.ones(n, dtype=np.int8)


def _sign_flip(n, count):
    sign = np.ones(n, dtype=np.int8)
    sign[:count] = -1
    return np.arange(n), sign


def discrete_signed_generators(family, n):
    """Discrete generators of G_n as (perm, sign) pairs."""
    family = as_family(family)
    if n < 1:
        raise UnsupportedGroup(f'group level must be positive, got {n}')
    if family is GroupFamily.TRIVIAL or n == 1 and family in (
        GroupFamily.SYM, GroupFamily.CYCLIC, GroupFamily.EVEN_SIGNED_SYM
    ):
        return []

    permutations = []
    if family in (GroupFamily.SYM, GroupFamily.SIGNED_SYM, GroupFamily.EVEN_SIGNED_SYM):
        if n >= 2:
            permutations.append(_transposition(n))
        if n >= 3:
            permutations.append(_cycle(n))
    if family is GroupFamily.CYCLIC:
        permutations.append(_cycle(n))
    if family in (GroupFamily.SIGNED_SYM, GroupFamily.ORTHOGONAL):
        permutations.append(_sign_flip(n, 1))
    if family is GroupFamily.EVEN_SIGNED_SYM and n >= 2:
        permutations.append(_sign_flip(n, 2))
    return permutations


def discrete_generators(family, n):
    """
    Discrete generators of G_n acting on R^n.

    Args:
        family: GroupFamily or its text name
        n: size of the base space

    Returns:
        list: sparse orthogonal n×n matrices; for the orthogonal family the
        single reflection diag(-1, 1, ..., 1), which together with the Lie
        algebra generates O_n
    """
    return [signed_permutation_matrix(p, s) for p, s in discrete_signed_generators(family, n)]


def lie_algebra_basis(family, n):
    """Elementary skew matrices E_ij = e_i e_j^T - e_j e_i^T (i < j) for O_n, else empty."""
    family = as_family(family)
    if n < 1:
        raise UnsupportedGroup(f'group level must be positive, got {n}')
    if family is not GroupFamily.ORTHOGONAL:
        return []
    basis = []
    for i in range(n):
        for j in range(i + 1, n):
            basis.append(
                sparse.csr_matrix(([1.0, -1.0], ([i, j], [j, i])), shape=(n, n))
            )
    return basis


def group_order(family, n):
    family = as_family(family)
    if family is GroupFamily.SYM:
        return factorial(n)
    if family is GroupFamily.SIGNED_SYM:
        return 2**n * factorial(n)
    if family is GroupFamily.EVEN_SIGNED_SYM:
        return 2 ** (n - 1) * factorial(n)
    if family is GroupFamily.CYCLIC:
        return n
    if family is GroupFamily.TRIVIAL:
        return 1
    return float('inf')


def _compose(first, second):
    """(perm, sign) of first @ second."""
    perm_a, sign_a = first
    perm_b, sign_b = second
    return perm_a[perm_b], sign_a[perm_b] * sign_b


def enumerate_signed_elements(family, n, limit=None):
    """
    All elements of a finite G_n by breadth-first closure of its generators.

    Args:
        family: finite GroupFamily
        n: base size
        limit: maximum number of elements (defaults to GROUP_ENUMERATION_LIMIT)

    Returns:
        list of (perm, sign) pairs, or None when the group exceeds the limit
    """
    family = as_family(family)
    if not family.is_finite:
        return None
    limit = get_setting('GROUP_ENUMERATION_LIMIT') if limit is None else limit
    generators = discrete_signed_generators(family, n)
    identity = (np.arange(n), np.ones(n, dtype=np.int8))

    def key(element):
        return element[0].tobytes() + element[1].tobytes()

    seen = {key(identity): identity}
    queue = deque([identity])
    while queue:
        current = queue.popleft()
        for generator in generators:
            candidate = _compose(generator, current)
            k = key(candidate)
            if k not in seen:
                seen[k] = candidate
                if len(seen) > limit:
                    return None
                queue.append(candidate)
    return list(seen.values())


def group_elements(family, n, limit=None):
    elements = enumerate_signed_elements(family, n, limit)
    if elements is None:
        return None
    return [signed_permutation_matrix(p, s) for p, s in elements]


def random_element(family, n, rng):
    """
    A random element of G_n as a dense n×n matrix.

    Finite families are sampled uniformly, the orthogonal family from the
    Haar measure.
    """
    family = as_family(family)
    if family is GroupFamily.ORTHOGONAL:
        if n == 1:
            return np.array([[rng.choice([-1.0, 1.0])]])
        return ortho_group.rvs(n, random_state=rng)
    if family is GroupFamily.TRIVIAL:
        return np.eye(n)
    if family is GroupFamily.CYCLIC:
        shift = rng.integers(n)
        return np.roll(np.eye(n), shift, axis=0)
    perm = rng.permutation(n)
    sign = np.ones(n)
    if family is GroupFamily.SIGNED_SYM:
        sign = rng.choice([-1.0, 1.0], size=n)
    elif family is GroupFamily.EVEN_SIGNED_SYM:
        sign = rng.choice([-1.0, 1.0], size=n)
        if np.prod(sign) < 0:
            sign[0] = -sign[0]
    matrix = np.zeros((n, n))
    matrix[perm, np.arange(n)] = sign
    return matrix


def embed_element(g, doubling=False):
    """Image of g ∈ G_n in G_{n+1}: g ⊕ 1, or g ⊗ I_2 for doubling sequences."""
    if doubling:
        return sparse.kron(sparse.csr_matrix(g), sparse.identity(2), format='csr')
    return sparse.block_diag([sparse.csr_matrix(g), sparse.identity(1)], format='csr')


def is_signed_permutation(g):
    return as_signed_permutation(g) is not None
