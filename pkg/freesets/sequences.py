"""
Consistent sequences of group representations.

A sequence is a frozen constructor tree: leaves are base sequences such as
``vec(sym)`` and combinators build sums, tensors, symmetric and exterior
powers and moment spaces on top of them. Every embedding V_n -> V_{n+1} in
this algebra is a signed copy map: each coordinate of V_{n+1} either copies
one coordinate of V_n (possibly with a sign) or is new. Leaves and
combinators only have to report that source index, and embeddings,
projections and isometry checks follow from it.

Coordinates are "entry" coordinates: a symmetric tensor is stored through
its entries at sorted index tuples, so the metric weight of a coordinate is
the number of orderings of its tuple times the child weights.
"""

import itertools
import logging
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache, reduce
from math import comb, factorial

import numpy as np
from scipy import sparse

from .exceptions import InvalidExpression, InvalidLevel, UnsupportedGroup
from .groups import (
    GroupFamily,
    as_family,
    discrete_generators,
    enumerate_signed_elements,
    group_order,
    lie_algebra_basis,
    random_element,
)
from .operators import EquivariantOperator
from .utils import as_signed_permutation, get_setting, signed_permutation_matrix

logger = logging.getLogger(__name__)

memoize = lru_cache(maxsize=None)


@dataclass(frozen=True)
class Unknown:
    """A degree the calculus cannot determine."""

    reason: str

    def __str__(self):
        return f'unknown ({self.reason})'


def _is_known(value):
    return not isinstance(value, Unknown)


def _degree_max(*values):
    for value in values:
        if not _is_known(value):
            return value
    return max(values) if values else 0


def _degree_add(*values):
    for value in values:
        if not _is_known(value):
            return value
    return sum(values)


def _degree_scale(factor, value):
    return value if not _is_known(value) else factor * value


def _read_only(array):
    array.flags.writeable = False
    return array


class Sequence(ABC):
    """Base class of all constructor-tree nodes."""

    children = ()

    @property
    def family(self):
        families = {child.family for child in self.children} - {None}
        return families.pop() if families else None

    @property
    def base(self):
        """(doubling, multiplier) of the leaves, or None when no leaf carries a group."""
        bases = {child.base for child in self.children} - {None}
        return bases.pop() if bases else None

    @property
    def doubling(self):
        return bool(self.base and self.base[0])

    def base_size(self, n):
        if self.base is None:
            return None
        doubling, multiplier = self.base
        return multiplier * 2**n if doubling else n

    def min_level(self):
        return 0 if self.doubling else 1

    def check_level(self, n):
        if not isinstance(n, (int, np.integer)) or n < self.min_level():
            raise InvalidLevel(f'level {n!r} is not valid for {self.expression()}')

    def _check_children(self):
        families = {child.family for child in self.children} - {None}
        if len(families) > 1:
            names = ', '.join(sorted(f.value for f in families))
            raise InvalidExpression(f'mixed group families ({names}) in one sequence')
        bases = {child.base for child in self.children} - {None}
        if len(bases) > 1:
            raise InvalidExpression('cannot combine zero-padded and doubling base spaces')

    @abstractmethod
    def dim(self, n):
        """Dimension of V_n."""

    @abstractmethod
    def weights(self, n):
        """Diagonal metric weights of the canonical basis of V_n."""

    @abstractmethod
    def labels(self, n):
        """Labels of the canonical basis of V_n."""

    @abstractmethod
    def source_index(self, n):
        """For each coordinate of V_{n+1}, the coordinate of V_n it copies, or -1."""

    def source_sign(self, n):
        return _read_only(np.ones(self.dim(n + 1)))

    @abstractmethod
    def action(self, n, g):
        """Matrix of the base-space matrix g acting on V_n."""

    @abstractmethod
    def lie_action(self, n, h):
        """Matrix of the Lie algebra element h (a skew base matrix) acting on V_n."""

    @abstractmethod
    def degrees(self):
        """(generation degree, presentation degree) under the calculus rules."""

    @abstractmethod
    def expression(self):
        """Canonical text form."""

    def __str__(self):
        return self.expression()


def _family_text(family):
    return family.value


def _coerce_family(family):
    return as_family(family)


def _leaf_degrees(family, known):
    if not family.is_signed_sym_type:
        return (
            Unknown(f'no degree calculus for the {family.value} family'),
            Unknown(f'no degree calculus for the {family.value} family'),
        )
    return known


# Leaves


@dataclass(frozen=True)
class Vec(Sequence):
    """R^n with zero-padding embeddings and the standard action."""

    group: GroupFamily

    def __post_init__(self):
        object.__setattr__(self, 'group', _coerce_family(self.group))

    @property
    def family(self):
        return self.group

    @property
    def base(self):
        return (False, 1)

    def dim(self, n):
        return n

    @memoize
    def weights(self, n):
        return _read_only(np.ones(n))

    def labels(self, n):
        return list(range(n))

    @memoize
    def source_index(self, n):
        return _read_only(np.concatenate([np.arange(n), [-1]]).astype(np.int64))

    def action(self, n, g):
        return sparse.csr_matrix(g)

    def lie_action(self, n, h):
        return sparse.csr_matrix(h)

    def degrees(self):
        return _leaf_degrees(self.group, (1, 1))

    def expression(self):
        return f'vec({_family_text(self.group)})'


@dataclass(frozen=True)
class PermVec(Sequence):
    """R^n on which signed permutations act through their underlying permutation."""

    group: GroupFamily

    def __post_init__(self):
        object.__setattr__(self, 'group', _coerce_family(self.group))
        if not self.group.is_finite:
            raise UnsupportedGroup('pvec needs a family of signed permutations')

    @property
    def family(self):
        return self.group

    @property
    def base(self):
        return (False, 1)

    def dim(self, n):
        return n

    @memoize
    def weights(self, n):
        return _read_only(np.ones(n))

    def labels(self, n):
        return list(range(n))

    @memoize
    def source_index(self, n):
        return _read_only(np.concatenate([np.arange(n), [-1]]).astype(np.int64))

    def action(self, n, g):
        return abs(_signed_part(g, 'pvec')[0])

    def lie_action(self, n, h):
        raise UnsupportedGroup('pvec has no Lie algebra action')

    def degrees(self):
        return _leaf_degrees(self.group, (1, 1))

    def expression(self):
        return f'pvec({_family_text(self.group)})'


def _signed_part(g, name):
    decomposition = as_signed_permutation(g)
    if decomposition is None:
        raise UnsupportedGroup(f'{name} only supports signed permutation group elements')
    perm, sign = decomposition
    return signed_permutation_matrix(perm, sign), perm, sign


@dataclass(frozen=True)
class LiftedL1(Sequence):
    """
    R^n ⊕ R^n ⊕ R holding (p, q, r), the lift used for ℓ1-type descriptions.

    A signed permutation g moves p_i and q_i to position g(i); when the sign
    at i is negative the two copies are exchanged. r is fixed.
    """

    group: GroupFamily

    def __post_init__(self):
        object.__setattr__(self, 'group', _coerce_family(self.group))
        if not self.group.is_finite:
            raise UnsupportedGroup('l1lift needs a family of signed permutations')

    @property
    def family(self):
        return self.group

    @property
    def base(self):
        return (False, 1)

    def dim(self, n):
        return 2 * n + 1

    @memoize
    def weights(self, n):
        return _read_only(np.ones(2 * n + 1))

    def labels(self, n):
        return [('p', i) for i in range(n)] + [('q', i) for i in range(n)] + [('r',)]

    @memoize
    def source_index(self, n):
        index = np.full(2 * n + 3, -1, dtype=np.int64)
        index[:n] = np.arange(n)
        index[n + 1:2 * n + 1] = n + np.arange(n)
        index[2 * n + 2] = 2 * n
        return _read_only(index)

    def action(self, n, g):
        _, perm, sign = _signed_part(g, 'l1lift')
        target = np.empty(2 * n + 1, dtype=np.int64)
        flipped = sign < 0
        target[:n] = np.where(flipped, n + perm, perm)
        target[n:2 * n] = np.where(flipped, perm, n + perm)
        target[2 * n] = 2 * n
        return signed_permutation_matrix(target, np.ones(2 * n + 1))

    def lie_action(self, n, h):
        raise UnsupportedGroup('l1lift has no Lie algebra action')

    def degrees(self):
        return _leaf_degrees(self.group, (1, 1))

    def expression(self):
        return f'l1lift({_family_text(self.group)})'


@dataclass(frozen=True)
class DoublingVec(Sequence):
    """R^{m 2^n} with x -> x ⊗ 1_2 and inner product (m 2^n)^{-1} x^T y."""

    group: GroupFamily
    multiplier: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'group', _coerce_family(self.group))
        if self.multiplier < 1:
            raise InvalidExpression('dvec multiplier must be positive')

    @property
    def family(self):
        return self.group

    @property
    def base(self):
        return (True, self.multiplier)

    def dim(self, n):
        return self.multiplier * 2**n

    @memoize
    def weights(self, n):
        size = self.dim(n)
        return _read_only(np.full(size, 1.0 / size))

    def labels(self, n):
        return list(range(self.dim(n)))

    @memoize
    def source_index(self, n):
        return _read_only(np.arange(self.dim(n + 1), dtype=np.int64) // 2)

    def action(self, n, g):
        return sparse.csr_matrix(g)

    def lie_action(self, n, h):
        return sparse.csr_matrix(h)

    def degrees(self):
        if self.group is GroupFamily.CYCLIC:
            reason = 'doubling sequences are not finitely generated under cyclic groups'
            return Unknown(reason), Unknown(reason)
        return 2, Unknown('presentation degree of doubling sequences is not known')

    def expression(self):
        if self.multiplier == 1:
            return f'dvec({_family_text(self.group)})'
        return f'dvec({_family_text(self.group)}, {self.multiplier})'


@dataclass(frozen=True)
class FixedSpace(Sequence):
    """A fixed R^k with trivial action."""

    size: int

    def __post_init__(self):
        if self.size < 0:
            raise InvalidExpression('fixed space size must be nonnegative')

    @property
    def family(self):
        return None

    @property
    def base(self):
        return None

    def min_level(self):
        return 0

    def dim(self, n):
        return self.size

    @memoize
    def weights(self, n):
        return _read_only(np.ones(self.size))

    def labels(self, n):
        return list(range(self.size))

    @memoize
    def source_index(self, n):
        return _read_only(np.arange(self.size, dtype=np.int64))

    def action(self, n, g):
        return sparse.identity(self.size, format='csr')

    def lie_action(self, n, h):
        return sparse.csr_matrix((self.size, self.size))

    def degrees(self):
        return 0, 0

    def expression(self):
        return f'fixed({self.size})'


# Symmetric and exterior powers


@memoize
def _power_tuples(m, k, strict):
    generator = itertools.combinations if strict else itertools.combinations_with_replacement
    tuples = np.fromiter(
        itertools.chain.from_iterable(generator(range(m), k)), dtype=np.int64
    ).reshape(-1, k)
    return _read_only(tuples)


def _place_values(m, k):
    return m ** np.arange(k - 1, -1, -1, dtype=np.int64)


@memoize
def _power_codes(m, k, strict):
    return _read_only(_power_tuples(m, k, strict) @ _place_values(m, k))


def _inversion_sign(rows):
    k = rows.shape[1]
    inversions = np.zeros(rows.shape[0], dtype=np.int64)
    for i in range(k):
        for j in range(i + 1, k):
            inversions += rows[:, i] > rows[:, j]
    return np.where(inversions % 2 == 0, 1.0, -1.0)


@memoize
def _expansion(m, k, strict):
    """Sparse (expand, select) maps between entry coordinates and full tensors."""
    full = np.stack(np.unravel_index(np.arange(m**k), (m,) * k), axis=1).astype(np.int64)
    codes = _power_codes(m, k, strict)
    ordered = np.sort(full, axis=1)
    if strict:
        distinct = np.all(np.diff(ordered, axis=1) > 0, axis=1)
        rows = np.flatnonzero(distinct)
        values = _inversion_sign(full[rows])
        cols = np.searchsorted(codes, ordered[rows] @ _place_values(m, k))
    else:
        rows = np.arange(m**k)
        values = np.ones(m**k)
        cols = np.searchsorted(codes, ordered @ _place_values(m, k))
    expand = sparse.csr_matrix((values, (rows, cols)), shape=(m**k, len(codes)))
    if strict:
        chosen = np.flatnonzero(np.all(np.diff(full, axis=1) > 0, axis=1))
    else:
        chosen = np.flatnonzero(np.all(np.diff(full, axis=1) >= 0, axis=1))
    select_cols = chosen
    select_rows = np.searchsorted(codes, full[chosen] @ _place_values(m, k))
    select = sparse.csr_matrix(
        (np.ones(len(chosen)), (select_rows, select_cols)), shape=(len(codes), m**k)
    )
    return expand, select


def _kron_power(matrix, k):
    return reduce(lambda a, b: sparse.kron(a, b, format='csr'), [matrix] * k)


def _kron_derivation(h, k):
    m = h.shape[0]
    identity = sparse.identity(m, format='csr')
    total = None
    for r in range(k):
        factors = [identity] * r + [h] + [identity] * (k - r - 1)
        term = reduce(lambda a, b: sparse.kron(a, b, format='csr'), factors)
        total = term if total is None else total + term
    return total


@dataclass(frozen=True)
class _Power(Sequence):
    order: int
    child: Sequence

    strict = False

    def __post_init__(self):
        if self.order < 1:
            raise InvalidExpression('power order must be positive')
        self._check_children()

    @property
    def children(self):
        return (self.child,)

    def min_level(self):
        return self.child.min_level()

    def _tuples(self, n):
        return _power_tuples(self.child.dim(n), self.order, self.strict)

    def dim(self, n):
        m = self.child.dim(n)
        return comb(m, self.order) if self.strict else comb(m + self.order - 1, self.order)

    @memoize
    def weights(self, n):
        tuples = self._tuples(n)
        child_weights = self.child.weights(n)
        product = np.prod(child_weights[tuples], axis=1) if len(tuples) else np.ones(0)
        if self.strict:
            return _read_only(factorial(self.order) * product)
        return _read_only(_multinomials(tuples) * product)

    def labels(self, n):
        child_labels = self.child.labels(n)
        return [tuple(child_labels[i] for i in row) for row in self._tuples(n)]

    @memoize
    def source_index(self, n):
        child_source = self.child.source_index(n)
        tuples = self._tuples(n + 1)
        mapped = child_source[tuples]
        valid = np.all(mapped >= 0, axis=1)
        ordered = np.sort(mapped, axis=1)
        if self.strict:
            valid &= np.all(np.diff(ordered, axis=1) > 0, axis=1)
        m = self.child.dim(n)
        codes = _power_codes(m, self.order, self.strict)
        index = np.full(len(tuples), -1, dtype=np.int64)
        if np.any(valid):
            index[valid] = np.searchsorted(codes, ordered[valid] @ _place_values(m, self.order))
        return _read_only(index)

    @memoize
    def source_sign(self, n):
        child_source = self.child.source_index(n)
        child_sign = self.child.source_sign(n)
        tuples = self._tuples(n + 1)
        sign = np.prod(child_sign[tuples], axis=1)
        if self.strict:
            sign = sign * _inversion_sign(child_source[tuples])
        return _read_only(sign)

    def action(self, n, g):
        inner = self.child.action(n, g)
        m = inner.shape[0]
        decomposition = as_signed_permutation(inner)
        if decomposition is not None:
            return self._signed_action(n, m, *decomposition)
        expand, select = _expansion(m, self.order, self.strict)
        inner = sparse.csr_matrix(inner)
        inner.data[np.abs(inner.data) < 1e-15] = 0.0
        inner.eliminate_zeros()
        return sparse.csr_matrix(select @ _kron_power(inner, self.order) @ expand)

    def _signed_action(self, n, m, perm, sign):
        tuples = self._tuples(n)
        mapped = perm[tuples]
        ordered = np.sort(mapped, axis=1)
        values = np.prod(sign[tuples].astype(float), axis=1)
        if self.strict:
            values = values * _inversion_sign(mapped)
        rows = np.searchsorted(
            _power_codes(m, self.order, self.strict), ordered @ _place_values(m, self.order)
        )
        size = len(tuples)
        return sparse.csr_matrix((values, (rows, np.arange(size))), shape=(size, size))

    def lie_action(self, n, h):
        inner = sparse.csr_matrix(self.child.lie_action(n, h))
        m = inner.shape[0]
        expand, select = _expansion(m, self.order, self.strict)
        return sparse.csr_matrix(select @ _kron_derivation(inner, self.order) @ expand)

    def degrees(self):
        gen, pres = self.child.degrees()
        ell = self.order
        return _degree_scale(ell, gen), _degree_add(_degree_scale(ell - 1, gen), pres)


def _multinomials(tuples):
    """Number of distinct orderings of each sorted row."""
    k = tuples.shape[1]
    denominator = np.ones(len(tuples))
    for i in range(k):
        denominator *= np.sum(tuples[:, : i + 1] == tuples[:, i : i + 1], axis=1)
    return factorial(k) / denominator


@dataclass(frozen=True)
class SymPow(_Power):
    """Sym^k of a sequence, coordinates at sorted index tuples."""

    def expression(self):
        return f'sympow({self.order}, {self.child.expression()})'


@dataclass(frozen=True)
class WedgePow(_Power):
    """Exterior power ⋀^k of a sequence, coordinates at increasing index tuples."""

    strict = True

    def expression(self):
        return f'wedge({self.order}, {self.child.expression()})'


# Combinators


@dataclass(frozen=True)
class DirectSum(Sequence):
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, 'parts', tuple(self.parts))
        if not self.parts:
            raise InvalidExpression('sum needs at least one part')
        self._check_children()

    @property
    def children(self):
        return self.parts

    def min_level(self):
        return max(part.min_level() for part in self.parts)

    def offsets(self, n):
        return np.concatenate([[0], np.cumsum([part.dim(n) for part in self.parts])]).astype(
            np.int64
        )

    def dim(self, n):
        return int(sum(part.dim(n) for part in self.parts))

    @memoize
    def weights(self, n):
        return _read_only(np.concatenate([part.weights(n) for part in self.parts]))

    def labels(self, n):
        return [(i, label) for i, part in enumerate(self.parts) for label in part.labels(n)]

    @memoize
    def source_index(self, n):
        offsets = self.offsets(n)
        pieces = []
        for offset, part in zip(offsets, self.parts):
            source = part.source_index(n)
            pieces.append(np.where(source >= 0, source + offset, -1))
        return _read_only(np.concatenate(pieces).astype(np.int64))

    @memoize
    def source_sign(self, n):
        return _read_only(np.concatenate([part.source_sign(n) for part in self.parts]))

    def action(self, n, g):
        return sparse.block_diag([part.action(n, g) for part in self.parts], format='csr')

    def lie_action(self, n, h):
        return sparse.block_diag([part.lie_action(n, h) for part in self.parts], format='csr')

    def degrees(self):
        pairs = [part.degrees() for part in self.parts]
        return _degree_max(*[p[0] for p in pairs]), _degree_max(*[p[1] for p in pairs])

    def expression(self):
        return 'sum(' + ', '.join(part.expression() for part in self.parts) + ')'


@dataclass(frozen=True)
class Tensor(Sequence):
    left: Sequence
    right: Sequence

    def __post_init__(self):
        self._check_children()

    @property
    def children(self):
        return (self.left, self.right)

    def min_level(self):
        return max(self.left.min_level(), self.right.min_level())

    def dim(self, n):
        return self.left.dim(n) * self.right.dim(n)

    @memoize
    def weights(self, n):
        return _read_only(np.kron(self.left.weights(n), self.right.weights(n)))

    def labels(self, n):
        return list(itertools.product(self.left.labels(n), self.right.labels(n)))

    @memoize
    def source_index(self, n):
        left = self.left.source_index(n)
        right = self.right.source_index(n)
        combined = left[:, None] * self.right.dim(n) + right[None, :]
        valid = (left[:, None] >= 0) & (right[None, :] >= 0)
        return _read_only(np.where(valid, combined, -1).ravel().astype(np.int64))

    @memoize
    def source_sign(self, n):
        return _read_only(np.kron(self.left.source_sign(n), self.right.source_sign(n)))

    def action(self, n, g):
        return sparse.kron(self.left.action(n, g), self.right.action(n, g), format='csr')

    def lie_action(self, n, h):
        left = self.left.lie_action(n, h)
        right = self.right.lie_action(n, h)
        return sparse.csr_matrix(
            sparse.kron(left, sparse.identity(right.shape[0]))
            + sparse.kron(sparse.identity(left.shape[0]), right)
        )

    def degrees(self):
        gen_l, pres_l = self.left.degrees()
        gen_r, pres_r = self.right.degrees()
        return (
            _degree_add(gen_l, gen_r),
            _degree_max(_degree_add(pres_l, gen_r), _degree_add(pres_r, gen_l)),
        )

    def expression(self):
        return f'tensor({self.left.expression()}, {self.right.expression()})'


@dataclass(frozen=True)
class _Alias(Sequence):
    """A named sequence that delegates its structure to an equivalent tree."""

    @property
    def inner(self):
        raise NotImplementedError

    @property
    def children(self):
        return (self.inner,)

    def min_level(self):
        return self.inner.min_level()

    def dim(self, n):
        return self.inner.dim(n)

    def weights(self, n):
        return self.inner.weights(n)

    def labels(self, n):
        return self.inner.labels(n)

    def source_index(self, n):
        return self.inner.source_index(n)

    def source_sign(self, n):
        return self.inner.source_sign(n)

    def action(self, n, g):
        return self.inner.action(n, g)

    def lie_action(self, n, h):
        return self.inner.lie_action(n, h)

    def degrees(self):
        return self.inner.degrees()


@dataclass(frozen=True)
class SymMat(_Alias):
    """S^n with zero-padding embeddings and conjugation action."""

    group: GroupFamily

    def __post_init__(self):
        object.__setattr__(self, 'group', _coerce_family(self.group))

    @property
    def inner(self):
        return SymPow(2, Vec(self.group))

    def degrees(self):
        return _leaf_degrees(self.group, (2, 2))

    def expression(self):
        return f'symmat({_family_text(self.group)})'


@dataclass(frozen=True)
class Graphon(_Alias):
    """S^{m 2^n} with X -> X ⊗ 1 1^T and the normalized Frobenius inner product."""

    group: GroupFamily
    multiplier: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'group', _coerce_family(self.group))

    @property
    def inner(self):
        return SymPow(2, DoublingVec(self.group, self.multiplier))

    def degrees(self):
        return DoublingVec(self.group, self.multiplier).degrees()

    def expression(self):
        if self.multiplier == 1:
            return f'graphon({_family_text(self.group)})'
        return f'graphon({_family_text(self.group)}, {self.multiplier})'


@dataclass(frozen=True)
class DoublingSymMat(Sequence):
    """S^{m 2^n} with X -> X ⊗ I_2, inner product (m 2^n)^{-1} Tr(XY)."""

    group: GroupFamily
    multiplier: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'group', _coerce_family(self.group))

    @property
    def family(self):
        return self.group

    @property
    def base(self):
        return (True, self.multiplier)

    def _square(self):
        return SymPow(2, DoublingVec(self.group, self.multiplier))

    def min_level(self):
        return 0

    def dim(self, n):
        return self._square().dim(n)

    @memoize
    def weights(self, n):
        side = self.multiplier * 2**n
        tuples = _power_tuples(side, 2, False)
        return _read_only(np.where(tuples[:, 0] == tuples[:, 1], 1.0, 2.0) / side)

    def labels(self, n):
        return self._square().labels(n)

    @memoize
    def source_index(self, n):
        side = self.multiplier * 2**n
        tuples = _power_tuples(2 * side, 2, False)
        valid = tuples[:, 0] % 2 == tuples[:, 1] % 2
        halves = tuples // 2
        index = np.full(len(tuples), -1, dtype=np.int64)
        index[valid] = np.searchsorted(
            _power_codes(side, 2, False), halves[valid] @ _place_values(side, 2)
        )
        return _read_only(index)

    def action(self, n, g):
        return self._square().action(n, g)

    def lie_action(self, n, h):
        return self._square().lie_action(n, h)

    def degrees(self):
        reason = 'no degree calculus for X ⊗ I_2 embeddings'
        return Unknown(reason), Unknown(reason)

    def expression(self):
        if self.multiplier == 1:
            return f'dsymmat({_family_text(self.group)})'
        return f'dsymmat({_family_text(self.group)}, {self.multiplier})'


@dataclass(frozen=True)
class SymLeq(_Alias):
    """Sym^{≤k}: constants, the sequence itself and its symmetric powers up to k."""

    order: int
    child: Sequence

    @property
    def inner(self):
        parts = [FixedSpace(1), self.child]
        parts += [SymPow(j, self.child) for j in range(2, self.order + 1)]
        return DirectSum(tuple(parts))

    def expression(self):
        return f'symleq({self.order}, {self.child.expression()})'


@dataclass(frozen=True)
class Moment(_Alias):
    """Moment matrices of order k: Sym^2(Sym^{≤k})."""

    order: int
    child: Sequence

    @property
    def inner(self):
        return SymPow(2, SymLeq(self.order, self.child))

    def expression(self):
        return f'moment({self.order}, {self.child.expression()})'


# Instantiation, embeddings and actions


@dataclass(frozen=True)
class SpaceInstance:
    sequence: Sequence
    level: int
    dim: int
    weights: np.ndarray
    labels: list


@memoize
def instantiate(seq, n):
    """
    Dimension, metric weights and basis labels of V_n.

    Raises:
        InvalidLevel: n is below the first level of the sequence
    """
    seq.check_level(n)
    return SpaceInstance(seq, n, seq.dim(n), seq.weights(n), seq.labels(n))


@memoize
def _step_matrix(seq, n):
    index = seq.source_index(n)
    sign = seq.source_sign(n)
    valid = np.flatnonzero(index >= 0)
    return sparse.csr_matrix(
        (sign[valid], (valid, index[valid])), shape=(seq.dim(n + 1), seq.dim(n))
    )


@memoize
def embedding(seq, n, N):
    """
    The embedding V_n -> V_N, the composition of the one-step embeddings.

    Raises:
        InvalidLevel: n > N or n not a level of the sequence
    """
    seq.check_level(n)
    if n > N:
        raise InvalidLevel(f'cannot embed level {n} into lower level {N}')
    matrix = sparse.identity(seq.dim(n), format='csr')
    for level in range(n, N):
        matrix = _step_matrix(seq, level) @ matrix
    return EquivariantOperator(seq, seq, n, N, matrix)


@memoize
def projection(seq, N, n):
    """The orthogonal projection V_N -> V_n, adjoint of the embedding."""
    return embedding(seq, n, N).adjoint()


@dataclass(frozen=True)
class GeneratorActions:
    discrete: list
    lie: list
    base_discrete: list
    base_lie: list


def base_generators(seq, n):
    family = seq.family
    if family is None:
        return [], []
    size = seq.base_size(n)
    return discrete_generators(family, size), lie_algebra_basis(family, size)


@memoize
def generator_action(seq, n):
    """
    Action of every discrete generator and Lie algebra basis element on V_n.

    Returns:
        GeneratorActions: sparse matrices on V_n along with the base matrices
    """
    seq.check_level(n)
    base_discrete, base_lie = base_generators(seq, n)
    discrete = [seq.action(n, g) for g in base_discrete]
    lie = [seq.lie_action(n, h) for h in base_lie]
    return GeneratorActions(discrete, lie, base_discrete, base_lie)


def generation_degree(seq):
    return _calculus(seq)[0]


def presentation_degree(seq):
    return _calculus(seq)[1]


def _calculus(seq):
    family = seq.family
    if family is not None and not family.is_signed_sym_type:
        reason = f'no degree calculus for the {family.value} family'
        return Unknown(reason), Unknown(reason)
    return seq.degrees()


def verify_generation_degree(seq, d, n_check, seed=0):
    """
    Check numerically that the G-orbit of V_d spans V_{n_check}.

    Small groups are enumerated; larger ones are sampled in batches until
    the rank reaches dim V_{n_check} or stops growing.

    Returns:
        bool: True when the orbit span is all of V_{n_check}
    """
    if n_check <= d:
        raise InvalidLevel('n_check must exceed the degree being verified')
    seq.check_level(d)
    target_dim = seq.dim(n_check)
    phi = embedding(seq, d, n_check).toarray()
    family = seq.family
    tol = get_setting('RANK_TOLERANCE')
    if family is None:
        return np.linalg.matrix_rank(phi, tol=tol * max(1.0, np.abs(phi).max())) == target_dim

    size = seq.base_size(n_check)
    elements = None
    if family.is_finite and group_order(family, size) <= get_setting('GROUP_ENUMERATION_LIMIT'):
        elements = [signed_permutation_matrix(p, s)
                    for p, s in enumerate_signed_elements(family, size)]
    rng = np.random.default_rng(seed)
    basis = np.zeros((target_dim, 0))

    def absorb(columns, basis):
        stacked = np.hstack([basis, columns])
        u, s, _ = np.linalg.svd(stacked, full_matrices=False)
        if s.size == 0 or s[0] == 0:
            return basis
        return u[:, : int(np.sum(s > tol * s[0]))]

    if elements is not None:
        for start in range(0, len(elements), 64):
            batch = [seq.action(n_check, g) @ phi for g in elements[start:start + 64]]
            basis = absorb(np.hstack(batch), basis)
            if basis.shape[1] == target_dim:
                return True
        return basis.shape[1] == target_dim

    stalls = 0
    while stalls < 3 and basis.shape[1] < target_dim:
        batch = [seq.action(n_check, random_element(family, size, rng)) @ phi for _ in range(32)]
        previous = basis.shape[1]
        basis = absorb(np.hstack([np.asarray(b) for b in batch]), basis)
        stalls = stalls + 1 if basis.shape[1] == previous else 0
    logger.debug('sampled orbit rank %d of %d for %s', basis.shape[1], target_dim, seq)
    return basis.shape[1] == target_dim


# Text form

_TOKEN = re.compile(r'\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(.))')

LEAVES = {
    'vec': Vec,
    'pvec': PermVec,
    'symmat': SymMat,
    'l1lift': LiftedL1,
    'dvec': DoublingVec,
    'graphon': Graphon,
    'dsymmat': DoublingSymMat,
}

POWERS = {
    'sympow': SymPow,
    'wedge': WedgePow,
    'symleq': SymLeq,
    'moment': Moment,
}


class _Parser:
    def __init__(self, text, default_family):
        self.text = text
        self.tokens = []
        for match in _TOKEN.finditer(text):
            number, name, other = match.groups()
            if number is not None:
                self.tokens.append(('int', int(number)))
            elif name is not None:
                self.tokens.append(('name', name.lower()))
            elif other is not None and other.strip():
                self.tokens.append(('sym', other))
        self.position = 0
        self.default_family = default_family

    def fail(self, message):
        raise InvalidExpression(f'{message} in sequence expression {self.text!r}')

    def peek(self):
        return self.tokens[self.position] if self.position < len(self.tokens) else (None, None)

    def take(self, kind=None, value=None):
        token = self.peek()
        if token[0] is None:
            self.fail('unexpected end')
        if (kind and token[0] != kind) or (value and token[1] != value):
            self.fail(f'unexpected {token[1]!r}')
        self.position += 1
        return token[1]

    def arguments(self):
        if self.peek() != ('sym', '('):
            return []
        self.take('sym', '(')
        args = []
        while True:
            kind, value = self.peek()
            if kind == 'int':
                args.append(self.take('int'))
            else:
                args.append(self.expression())
            if self.peek() == ('sym', ','):
                self.take('sym', ',')
                continue
            self.take('sym', ')')
            return args

    def family_argument(self, name, args):
        if args and isinstance(args[0], GroupFamily):
            return args[0], args[1:]
        if self.default_family is None:
            self.fail(f'{name} needs a group family')
        return as_family(self.default_family), args

    def expression(self):
        name = self.take('name')
        if name in {f.value for f in GroupFamily}:
            return GroupFamily(name)
        args = self.arguments()
        if name in LEAVES:
            family, rest = self.family_argument(name, args)
            if any(not isinstance(a, int) for a in rest) or len(rest) > 1:
                self.fail(f'bad arguments for {name}')
            if rest and name not in ('dvec', 'graphon', 'dsymmat'):
                self.fail(f'{name} takes only a group family')
            return LEAVES[name](family, *rest)
        if name == 'fixed':
            if len(args) != 1 or not isinstance(args[0], int):
                self.fail('fixed takes one integer')
            return FixedSpace(args[0])
        if name == 'sum':
            if not args or not all(isinstance(a, Sequence) for a in args):
                self.fail('sum takes sequences')
            return DirectSum(tuple(args))
        if name == 'tensor':
            if len(args) != 2 or not all(isinstance(a, Sequence) for a in args):
                self.fail('tensor takes two sequences')
            return Tensor(*args)
        if name in POWERS:
            if len(args) != 2 or not isinstance(args[0], int) or not isinstance(args[1], Sequence):
                self.fail(f'{name} takes an order and a sequence')
            return POWERS[name](args[0], args[1])
        self.fail(f'unknown constructor {name!r}')

    def parse(self):
        result = self.expression()
        if not isinstance(result, Sequence):
            self.fail('expected a sequence')
        if self.position != len(self.tokens):
            self.fail('trailing input')
        return result


def parse_sequence(text, default_family=None):
    """
    Parse a sequence expression such as ``moment(2, vec(sym))``.

    Args:
        text: constructor expression
        default_family: family used by leaves written without one

    Returns:
        Sequence
    """
    return _Parser(text, default_family).parse()
