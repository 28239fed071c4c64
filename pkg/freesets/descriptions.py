"""
Free conic descriptions

    C_n = {x ∈ V_n : ∃ y ∈ W_n, A_n x + B_n y + u_n ∈ K_n}

stored at a single level n0 and instantiated at any other level through the
unique equivariant extension of A, B and u.

Every conic program below is written in metric-orthonormal coordinates
x̄ = sqrt(w) x. In those coordinates the PSD blocks of symmetric-square
spaces are exactly svec vectors, and adjoints are plain transposes.
"""

import logging
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property

import numpy as np
from scipy import sparse

from .equivariant import (
    commutation_residual,
    extend_invariant,
    extend_operator,
    invariance_residual,
    restriction_constraints,
    vectorize,
)
from .exceptions import (
    Indeterminate,
    Infeasible,
    InvalidDescription,
    InvalidLevel,
    NonUniqueExtension,
    NotExtendable,
    NumericalFailure,
    Unbounded,
)
from .operators import EquivariantOperator
from .sequences import embedding, projection
from .solver import (
    ConeBlock,
    ConeKind,
    ConicProgram,
    block_slices,
    cone_identity,
    cone_rows,
    dual_cone,
    solve,
)
from .utils import get_setting, smat, svec

logger = logging.getLogger(__name__)

COMPATIBLE_KINDS = frozenset({ConeKind.ZERO, ConeKind.NONNEG, ConeKind.PSD})


class UExtension(str, Enum):
    EXTEND = 'extend'
    IDENTITY = 'identity'


@dataclass(frozen=True)
class DescriptionFlags:
    """Which of A, A*, B, B* are claimed to be morphisms, and how u extends."""

    a_morphism: bool = False
    a_adjoint: bool = False
    b_morphism: bool = False
    b_adjoint: bool = False
    u_extension: UExtension = UExtension.EXTEND

    def __post_init__(self):
        object.__setattr__(self, 'u_extension', UExtension(self.u_extension))

    def names(self):
        names = [
            name for name in ('a_morphism', 'a_adjoint', 'b_morphism', 'b_adjoint')
            if getattr(self, name)
        ]
        if self.u_extension is UExtension.IDENTITY:
            names.append('u_identity')
        return names

    @classmethod
    def from_names(cls, names):
        names = set(names)
        unknown = names - {'a_morphism', 'a_adjoint', 'b_morphism', 'b_adjoint', 'u_identity'}
        if unknown:
            raise InvalidDescription(f'unknown description flags: {", ".join(sorted(unknown))}')
        return cls(
            a_morphism='a_morphism' in names,
            a_adjoint='a_adjoint' in names,
            b_morphism='b_morphism' in names,
            b_adjoint='b_adjoint' in names,
            u_extension=UExtension.IDENTITY if 'u_identity' in names else UExtension.EXTEND,
        )


@dataclass(frozen=True, eq=False)
class FreeDescription:
    """
    A free conic description stored at level n0.

    ``a0`` maps V_{n0} -> U_{n0}, ``b0`` maps W_{n0} -> U_{n0} and ``u0`` is
    an invariant of U_{n0}, all in canonical coordinates. ``regularization``
    is the λ used by gauge evaluations when none is given.
    """

    seq_v: object
    seq_w: object
    seq_u: object
    cone: object
    a0: EquivariantOperator
    b0: EquivariantOperator
    u0: np.ndarray
    n0: int
    flags: DescriptionFlags = DescriptionFlags()
    regularization: float = 0.0
    name: str = ''
    _instances: dict = field(default_factory=dict, init=False, repr=False)
    _lock: object = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, 'u0', np.asarray(self.u0, dtype=float).ravel())
        if self.regularization < 0:
            raise InvalidDescription('regularization must be nonnegative')
        self._check_shapes()
        self._check_data()

    def _check_shapes(self):
        n0 = self.n0
        for label, operator, source in (('A', self.a0, self.seq_v), ('B', self.b0, self.seq_w)):
            if operator.source != source or operator.target != self.seq_u:
                raise InvalidDescription(f'{label}0 does not map {source} -> {self.seq_u}')
            if operator.source_level != n0 or operator.target_level != n0:
                raise InvalidDescription(f'{label}0 is not stored at level {n0}')
        dim_u = self.seq_u.dim(n0)
        if len(self.u0) != dim_u:
            raise InvalidDescription(f'u0 has length {len(self.u0)}, expected {dim_u}')
        rows = self.cone.rows(n0)
        if rows != dim_u:
            raise InvalidDescription(
                f'cone {self.cone} has {rows} rows at level {n0} but dim U = {dim_u}'
            )

    def _check_data(self):
        tol = get_setting('RESIDUAL_TOLERANCE')
        for label, operator in (('A0', self.a0), ('B0', self.b0)):
            residual = commutation_residual(operator)
            if residual > tol * max(1.0, operator.frobenius_norm()):
                raise InvalidDescription(f'{label} is not equivariant (residual {residual:.3e})')
        residual = invariance_residual(self.seq_u, self.n0, self.u0)
        if residual > tol * max(1.0, float(np.linalg.norm(self.u0))):
            raise InvalidDescription(f'u0 is not invariant (residual {residual:.3e})')
        if self.flags.u_extension is UExtension.IDENTITY:
            identity = _identity_vector(self.seq_u, self.n0, self.cone.at(self.n0))
            if np.linalg.norm(identity - self.u0) > tol * max(1.0, np.linalg.norm(identity)):
                raise InvalidDescription('u0 is flagged as the cone identity but differs from it')
        residuals = morphism_residuals(self)
        for name in self.flags.names():
            if name in residuals and residuals[name] > tol * max(1.0, _operator_norm(self, name)):
                raise InvalidDescription(
                    f'{name.replace("_", " ")} flag set but the residual is {residuals[name]:.3e}'
                )

    def with_regularization(self, value):
        return replace(self, regularization=float(value))

    def __str__(self):
        label = self.name or 'description'
        return (
            f'{label}: V={self.seq_v}, W={self.seq_w}, U={self.seq_u}, '
            f'K={self.cone}, n0={self.n0}'
        )


def _operator_norm(description, name):
    operator = description.a0 if name.startswith('a') else description.b0
    return operator.frobenius_norm()


def _identity_vector(seq_u, n, cones):
    return cone_identity(cones) / np.sqrt(np.asarray(seq_u.weights(n)))


def _split_residuals(source, target, operator):
    """(morphism residual, adjoint-morphism residual) of a level-n0 operator."""
    n0 = operator.source_level
    vector = vectorize(operator)
    plain = restriction_constraints(source, target, n0, with_adjoint=False)
    full = restriction_constraints(source, target, n0, with_adjoint=True)
    extra = full[len(plain):]

    def worst(blocks):
        return float(max((np.linalg.norm(block @ vector) for block in blocks), default=0.0))

    return worst(plain), worst(extra)


def morphism_residuals(description):
    """Residuals of the morphism conditions for A, A*, B and B*."""
    a_plain, a_extra = _split_residuals(description.seq_v, description.seq_u, description.a0)
    if description.seq_w.dim(description.n0) == 0:
        b_plain = b_extra = 0.0
    else:
        b_plain, b_extra = _split_residuals(description.seq_w, description.seq_u, description.b0)
    return {
        'a_morphism': a_plain,
        'a_adjoint': a_extra,
        'b_morphism': b_plain,
        'b_adjoint': b_extra,
    }


@dataclass(frozen=True, eq=False)
class DescriptionInstance:
    """A_n, B_n, u_n and K_n at one level, with their orthonormal-coordinate forms."""

    level: int
    a: EquivariantOperator
    b: EquivariantOperator
    u: np.ndarray
    cones: tuple

    @cached_property
    def root_v(self):
        return np.sqrt(np.asarray(self.a.source.weights(self.level)))

    @cached_property
    def root_w(self):
        return np.sqrt(np.asarray(self.b.source.weights(self.level)))

    @cached_property
    def root_u(self):
        return np.sqrt(np.asarray(self.a.target.weights(self.level)))

    @cached_property
    def a_bar(self):
        return sparse.csr_matrix(
            sparse.diags(self.root_u) @ self.a.matrix @ sparse.diags(1.0 / self.root_v)
        )

    @cached_property
    def b_bar(self):
        if self.b.matrix.shape[1] == 0:
            return sparse.csr_matrix(self.b.matrix.shape)
        return sparse.csr_matrix(
            sparse.diags(self.root_u) @ self.b.matrix @ sparse.diags(1.0 / self.root_w)
        )

    @cached_property
    def u_bar(self):
        return self.root_u * self.u

    @property
    def dim_v(self):
        return self.a.matrix.shape[1]

    @property
    def dim_w(self):
        return self.b.matrix.shape[1]

    def cone_value(self, x, y=None, t=1.0):
        """A x + B y + t u in orthonormal coordinates."""
        value = self.a_bar @ (self.root_v * x) + t * self.u_bar
        if y is not None and self.dim_w:
            value = value + self.b_bar @ (self.root_w * y)
        return np.asarray(value).ravel()

    def u_interior(self):
        """Whether u_n lies in the interior of every non-zero block of K_n."""
        tol = get_setting('MEMBERSHIP_TOLERANCE')
        for block, where in zip(self.cones, block_slices(self.cones)):
            segment = self.u_bar[where]
            if block.kind is ConeKind.NONNEG and segment.size and segment.min() <= tol:
                return False
            if block.kind is ConeKind.PSD and block.size:
                if np.linalg.eigvalsh(smat(segment, block.size)).min() <= tol:
                    return False
            if block.kind is ConeKind.SOC and block.size:
                if segment[0] - np.linalg.norm(segment[1:]) <= tol:
                    return False
        return True


def _extend(source, target, operator, n):
    if source.dim(n) == 0 or operator.matrix.nnz == 0:
        return EquivariantOperator(
            source, target, n, n, sparse.csr_matrix((target.dim(n), source.dim(n)))
        )
    return extend_operator(source, target, operator, n)


def instantiate_description(description, n):
    """
    A_n, B_n, u_n and K_n of a description.

    Levels above n0 use the unique equivariant extension; levels below use
    restrictions. Instances are cached on the description.

    Raises:
        InvalidLevel: n is not a level of one of the sequences
        NonUniqueExtension: n0 does not determine the operators at level n
    """
    with description._lock:
        cached = description._instances.get(n)
    if cached is not None:
        return cached
    for seq in (description.seq_v, description.seq_w, description.seq_u):
        seq.check_level(n)

    cones = description.cone.at(n)
    dim_u = description.seq_u.dim(n)
    if cone_rows(cones) != dim_u:
        raise InvalidDescription(
            f'cone {description.cone} has {cone_rows(cones)} rows at level {n}, dim U = {dim_u}'
        )
    a = _extend(description.seq_v, description.seq_u, description.a0, n)
    b = _extend(description.seq_w, description.seq_u, description.b0, n)
    if description.flags.u_extension is UExtension.IDENTITY:
        u = _identity_vector(description.seq_u, n, cones)
    else:
        u = extend_invariant(description.seq_u, description.u0, description.n0, n)
    instance = DescriptionInstance(n, a, b, np.asarray(u, dtype=float), cones)
    if not instance.u_interior():
        logger.info(
            'u is on the boundary of K at level %d; gauge values with λ=0 may only be '
            'attained in the limit', n,
        )
    with description._lock:
        return description._instances.setdefault(n, instance)


def _level_vector(x, seq, n, what='x'):
    x = np.asarray(x, dtype=float).ravel()
    if len(x) != seq.dim(n):
        raise InvalidLevel(f'{what} has length {len(x)} but the level-{n} space has {seq.dim(n)}')
    return x


def _column(values):
    return sparse.csr_matrix(np.asarray(values, dtype=float).reshape(-1, 1))


def _slack_direction(block):
    direction = np.zeros(block.rows)
    if block.kind is ConeKind.NONNEG:
        direction[:] = 1.0
    elif block.kind is ConeKind.PSD:
        direction = svec(np.eye(block.size))
    elif block.kind is ConeKind.SOC:
        direction[0] = 1.0
    elif block.kind is ConeKind.EXP:
        direction[2::3] = 1.0
    elif block.kind is ConeKind.RELENT:
        direction[-1] = 1.0
    return direction


def slack_program(matrix, offset, cones, eq_matrix=None, eq_rhs=None):
    """
    Minimize s >= 0 subject to matrix @ v + offset + s e ∈ K.

    ``e`` is an interior direction per block; zero blocks become |r| <= s.
    The optimal s is zero exactly when the system is feasible.
    """
    matrix = sparse.csr_matrix(matrix)
    offset = np.asarray(offset, dtype=float)
    nvars = matrix.shape[1]
    g_blocks, h_blocks, blocks = [], [], []
    for block, where in zip(cones, block_slices(cones)):
        if block.rows == 0:
            continue
        g, h = matrix[where], offset[where]
        if block.kind is ConeKind.ZERO:
            ones = _column(np.ones(block.rows))
            g_blocks += [sparse.hstack([g, ones]), sparse.hstack([-g, ones])]
            h_blocks += [h, -h]
            blocks += [ConeBlock(ConeKind.NONNEG, block.rows)] * 2
            continue
        g_blocks.append(sparse.hstack([g, _column(_slack_direction(block))]))
        h_blocks.append(h)
        blocks.append(block)
    g_blocks.append(sparse.csr_matrix(([1.0], ([0], [nvars])), shape=(1, nvars + 1)))
    h_blocks.append(np.zeros(1))
    blocks.append(ConeBlock(ConeKind.NONNEG, 1))

    objective = np.zeros(nvars + 1)
    objective[-1] = 1.0
    if eq_matrix is not None:
        eq_matrix = sparse.hstack(
            [sparse.csr_matrix(eq_matrix), sparse.csr_matrix((eq_matrix.shape[0], 1))]
        )
    return ConicProgram(
        objective,
        sparse.vstack(g_blocks, format='csr'),
        np.concatenate(h_blocks),
        tuple(blocks),
        eq_matrix,
        eq_rhs,
    )


def membership(description, n, x, tol=None):
    """
    Whether x ∈ C_n.

    Solves the slack program for A_n x + B_n y + u_n ∈ K_n and accepts when
    the optimal slack is at most ``tol`` (MEMBERSHIP_TOLERANCE by default).

    Raises:
        Indeterminate: the solver failed
    """
    tol = get_setting('MEMBERSHIP_TOLERANCE') if tol is None else tol
    instance = instantiate_description(description, n)
    x = _level_vector(x, description.seq_v, n)
    program = slack_program(instance.b_bar, instance.cone_value(x), instance.cones)
    try:
        slack = solve(program).objective
    except Infeasible:
        return False
    except (NumericalFailure, Unbounded) as exc:
        raise Indeterminate(f'membership at level {n} is undecided: {exc}') from exc
    logger.debug('membership slack at level %d is %.3e', n, slack)
    return slack <= tol


@dataclass
class GaugeResult:
    value: float
    t: float
    y: np.ndarray
    feasible: bool = True
    status: str = 'optimal'


@dataclass
class DualGaugeResult:
    value: float
    z: np.ndarray
    bounded: bool = True
    status: str = 'optimal'


def _regularization(description, lam):
    lam = description.regularization if lam is None else float(lam)
    if lam < 0:
        raise ValueError('λ must be nonnegative')
    return lam


def primal_gauge_program(offset, b_bar, u_bar, cones, lam):
    """
    min t + λ‖y‖ s.t. offset + B y + t u ∈ K, t >= 0, in orthonormal coordinates.

    Variables are (t, y) followed by an epigraph variable for λ‖y‖ when
    λ > 0 and W is nonzero.
    """
    rows, dim_w = b_bar.shape
    penalized = lam > 0 and dim_w > 0
    nvars = 1 + dim_w + (1 if penalized else 0)
    g_blocks = [
        sparse.hstack(
            [_column(u_bar), sparse.csr_matrix(b_bar), sparse.csr_matrix((rows, nvars - 1 - dim_w))]
        ),
        sparse.csr_matrix(([1.0], ([0], [0])), shape=(1, nvars)),
    ]
    h_blocks = [np.asarray(offset, dtype=float).ravel(), np.zeros(1)]
    blocks = list(cones) + [ConeBlock(ConeKind.NONNEG, 1)]
    objective = np.zeros(nvars)
    objective[0] = 1.0
    if penalized:
        tau = sparse.csr_matrix(([1.0], ([0], [nvars - 1])), shape=(1, nvars))
        scaled = sparse.hstack(
            [
                sparse.csr_matrix((dim_w, 1)),
                lam * sparse.identity(dim_w),
                sparse.csr_matrix((dim_w, 1)),
            ]
        )
        g_blocks.append(sparse.vstack([tau, scaled]))
        h_blocks.append(np.zeros(1 + dim_w))
        blocks.append(ConeBlock(ConeKind.SOC, 1 + dim_w))
        objective[-1] = 1.0
    return ConicProgram(
        objective, sparse.vstack(g_blocks, format='csr'), np.concatenate(h_blocks), blocks
    )


def dual_gauge_program(offset, b_bar, u_bar, cones, lam):
    """max −⟨z, offset⟩ s.t. z ∈ K*, ⟨z, u⟩ <= 1, ‖B^T z‖ <= λ; λ = 0 means B^T z = 0."""
    dim_u, dim_w = b_bar.shape
    dual_rows, dual_blocks = dual_cone(cones)
    g_blocks = [dual_rows, sparse.csr_matrix(-np.asarray(u_bar, dtype=float).reshape(1, -1))]
    h_blocks = [np.zeros(dual_rows.shape[0]), np.ones(1)]
    blocks = list(dual_blocks) + [ConeBlock(ConeKind.NONNEG, 1)]
    eq_matrix = eq_rhs = None
    if dim_w and lam > 0:
        g_blocks.append(sparse.vstack([sparse.csr_matrix((1, dim_u)), sparse.csr_matrix(b_bar).T]))
        h_blocks.append(np.concatenate([[lam], np.zeros(dim_w)]))
        blocks.append(ConeBlock(ConeKind.SOC, 1 + dim_w))
    elif dim_w:
        eq_matrix = sparse.csr_matrix(sparse.csr_matrix(b_bar).T)
        eq_rhs = np.zeros(dim_w)
    return ConicProgram(
        -np.asarray(offset, dtype=float).ravel(),
        sparse.vstack(g_blocks, format='csr'),
        np.concatenate(h_blocks),
        blocks,
        eq_matrix,
        eq_rhs,
        maximize=True,
    )


def solve_gauge(description, n, x, lam=None):
    """
    The primal gauge program

        min t + λ‖y‖  s.t.  A_n x + B_n y + t u_n ∈ K_n,  t >= 0

    with witnesses (t, y) in canonical coordinates. An infeasible program
    gives value +inf and ``feasible=False``.
    """
    lam = _regularization(description, lam)
    instance = instantiate_description(description, n)
    x = _level_vector(x, description.seq_v, n)
    dim_w = instance.dim_w
    offset = instance.a_bar @ (instance.root_v * x)
    program = primal_gauge_program(offset, instance.b_bar, instance.u_bar, instance.cones, lam)
    try:
        result = solve(program)
    except Infeasible as exc:
        logger.warning('gauge program at level %d is infeasible; reporting +inf', n)
        return GaugeResult(np.inf, np.inf, np.zeros(dim_w), feasible=False, status=exc.status)
    y_bar = result.primal[1:1 + dim_w]
    return GaugeResult(
        result.objective, float(result.primal[0]), y_bar / instance.root_w if dim_w else y_bar,
        status=result.backend_status,
    )


def gauge(description, n, x, lam=None):
    """inf{t + λ‖y‖ : A_n x + B_n y + t u_n ∈ K_n}; +inf when infeasible."""
    return solve_gauge(description, n, x, lam).value


def solve_gauge_dual(description, n, x, lam=None):
    """
    The dual gauge program

        max −⟨z, A_n x⟩  s.t.  z ∈ K_n*,  ⟨z, u_n⟩ <= 1,  ‖B_n* z‖ <= λ

    with the witness z in orthonormal coordinates of U_n.
    """
    lam = _regularization(description, lam)
    instance = instantiate_description(description, n)
    x = _level_vector(x, description.seq_v, n)
    offset = instance.a_bar @ (instance.root_v * x)
    program = dual_gauge_program(offset, instance.b_bar, instance.u_bar, instance.cones, lam)
    try:
        result = solve(program)
    except Unbounded as exc:
        return DualGaugeResult(
            np.inf, np.zeros(len(instance.u_bar)), bounded=False, status=exc.status
        )
    return DualGaugeResult(result.objective, result.primal, status=result.backend_status)


def gauge_dual(description, n, x, lam=None):
    return solve_gauge_dual(description, n, x, lam).value


def _support_program(instance, c, lift=None):
    """
    max ⟨c, x⟩ over C_n for c in canonical coordinates.

    Variables are x̄ in orthonormal coordinates, or x' at a lower level with
    x = lift @ x', in which case ``c`` is already the cost vector on x'.
    """
    dim_w = instance.dim_w
    if lift is None:
        a_part = instance.a_bar
        cost = c * instance.root_v
    else:
        a_part = sparse.csr_matrix(sparse.diags(instance.root_u) @ instance.a.matrix @ lift)
        cost = c
    objective = np.concatenate([cost, np.zeros(dim_w)])
    return ConicProgram(
        objective,
        sparse.hstack([a_part, instance.b_bar], format='csr'),
        instance.u_bar,
        instance.cones,
        maximize=True,
    )


def support_point(description, n, c):
    """
    A maximizer and the value of ⟨c, x⟩ over C_n, in canonical coordinates.

    Raises:
        Unbounded: C_n is unbounded in direction c
        Infeasible: C_n is empty
    """
    instance = instantiate_description(description, n)
    c = _level_vector(c, description.seq_v, n, 'c')
    result = solve(_support_program(instance, c))
    return result.objective, result.primal[:instance.dim_v] / instance.root_v


def support_function(description, n, c):
    """h_{C_n}(c) = sup over x ∈ C_n of ⟨c, x⟩."""
    return support_point(description, n, c)[0]


def sample_points(description, n, count, seed=0, within_level=None):
    """
    Random points of C_n as convex combinations of support points.

    With ``within_level=m`` the points are drawn from C_n ∩ V_m and
    returned in the coordinates of V_m.
    """
    rng = np.random.default_rng(seed)
    instance = instantiate_description(description, n)
    if within_level is None:
        level, lift = n, None
    else:
        level = within_level
        lift = embedding(description.seq_v, within_level, n).matrix
    weights = np.asarray(description.seq_v.weights(level))
    dim = description.seq_v.dim(level)
    pool = []
    for _ in range(max(8, count // 2)):
        direction = rng.standard_normal(dim)
        if lift is None:
            result = solve(_support_program(instance, direction))
            pool.append(result.primal[:dim] / np.sqrt(weights))
        else:
            result = solve(_support_program(instance, direction * weights, lift))
            pool.append(result.primal[:dim])
    pool = np.array(pool)
    points = []
    for _ in range(count):
        chosen = rng.choice(len(pool), size=min(3, len(pool)), replace=False)
        mix = rng.dirichlet(np.ones(len(chosen)))
        points.append(mix @ pool[chosen])
    return np.array(points)


# Compatibility certificates


class Verdict(str, Enum):
    CERTIFIED = 'certified'
    CERTIFIED_UP_TO = 'certified_up_to'
    FAILED = 'failed'
    NOT_APPLICABLE = 'not_applicable'


@dataclass
class HypothesisCheck:
    name: str
    passed: bool
    residual: float = 0.0
    detail: str = ''


@dataclass
class LevelCheck:
    level: int
    difference: float
    case_a_slack: float
    case_b_slack: float


@dataclass
class CompatibilityReport:
    """Outcome of checking the hypotheses that certify intersection and projection compatibility."""

    hypotheses: dict
    levels: list
    intersection: Verdict
    projection: Verdict
    projection_case: str = ''
    checked_through: int = 0
    closed_form: str = ''

    def hypothesis(self, name):
        return self.hypotheses[name]

    def as_dict(self):
        return {
            'hypotheses': {
                name: {'passed': check.passed, 'residual': check.residual, 'detail': check.detail}
                for name, check in self.hypotheses.items()
            },
            'levels': [
                {
                    'level': check.level,
                    'difference': check.difference,
                    'case_a_slack': check.case_a_slack,
                    'case_b_slack': check.case_b_slack,
                }
                for check in self.levels
            ],
            'intersection': self.intersection.value,
            'projection': self.projection.value,
            'projection_case': self.projection_case,
            'checked_through': self.checked_through,
            'closed_form': self.closed_form,
        }

    def lines(self):
        lines = []
        for name, check in self.hypotheses.items():
            mark = 'pass' if check.passed else 'FAIL'
            extra = f' ({check.detail})' if check.detail else ''
            lines.append(f'{name:<20} {mark}  residual={check.residual:.3e}{extra}')
        for check in self.levels:
            lines.append(
                f'level {check.level}->{check.level + 1}: |u_(n+1) - u_n|={check.difference:.3e} '
                f'case (a) slack={check.case_a_slack:.3e} case (b) slack={check.case_b_slack:.3e}'
            )
        verdicts = (('intersection', self.intersection), ('projection', self.projection))
        for label, verdict in verdicts:
            text = verdict.value
            if verdict is Verdict.CERTIFIED_UP_TO:
                text = (
                    f'certified up to level {self.checked_through}; '
                    'closed-form proof required beyond'
                )
            if label == 'projection' and self.projection_case:
                text += f' [case ({self.projection_case})]'
            lines.append(f'{label}: {text}')
        return lines


def _solve_slack(program):
    try:
        return solve(program).objective
    except Infeasible:
        return np.inf
    except NumericalFailure as exc:
        logger.warning('compatibility slack program failed: %s', exc)
        return np.inf


def _level_checks(description, n):
    """Slack of the case (a) and case (b) cone conditions between levels n and n+1."""
    low = instantiate_description(description, n)
    high = instantiate_description(description, n + 1)
    seq_v, seq_w, seq_u = description.seq_v, description.seq_w, description.seq_u
    embedded_u = np.asarray(embedding(seq_u, n, n + 1).matrix @ low.u).ravel()
    difference = high.u_bar - high.root_u * embedded_u

    dim_w_low, dim_w_high = low.dim_w, high.dim_w
    if dim_w_high:
        projector = projection(seq_w, n + 1, n).matrix @ sparse.diags(1.0 / high.root_w)
        case_a = _solve_slack(
            slack_program(
                high.b_bar, difference, high.cones, sparse.csr_matrix(projector),
                np.zeros(dim_w_low),
            )
        )
    else:
        no_w = sparse.csr_matrix((len(difference), 0))
        case_a = _solve_slack(slack_program(no_w, difference, high.cones))

    v_projector = projection(seq_v, n + 1, n).matrix @ sparse.diags(1.0 / high.root_v)
    if dim_w_low:
        lifted_b = sparse.diags(high.root_u) @ high.b.matrix @ embedding(seq_w, n, n + 1).matrix
    else:
        lifted_b = sparse.csr_matrix((len(difference), 0))
    matrix = sparse.hstack([high.a_bar, lifted_b], format='csr')
    eq_matrix = sparse.hstack(
        [sparse.csr_matrix(v_projector), sparse.csr_matrix((v_projector.shape[0], dim_w_low))]
    )
    case_b = _solve_slack(
        slack_program(matrix, difference, high.cones, eq_matrix, np.zeros(eq_matrix.shape[0]))
    )
    return LevelCheck(n, float(np.linalg.norm(difference)), float(case_a), float(case_b))


def _closed_form(description, levels):
    """The name of a closed-form reason for u_(n+1) - u_n ∈ K_(n+1) at every level, if any."""
    tol = get_setting('MEMBERSHIP_TOLERANCE')
    if description.flags.u_extension is UExtension.IDENTITY:
        return 'u is the cone identity'
    if levels and all(check.difference <= tol for check in levels):
        return 'u is constant under the embeddings'
    identities = []
    for check in levels:
        for n in (check.level, check.level + 1):
            instance = instantiate_description(description, n)
            identities.append(np.allclose(instance.u_bar, cone_identity(instance.cones), atol=tol))
    if identities and all(identities):
        return 'u is the cone identity'
    return ''


def certify_compatibility(description, levels_checked=2):
    """
    Check the hypotheses certifying intersection and projection compatibility.

    Morphism conditions are checked through the restriction residuals at n0.
    The cone condition on u is solved as a feasibility problem between each
    pair of consecutive levels n0..n0+levels_checked: case (a) asks for
    u_(n+1) − u_n + B_(n+1) y ∈ K_(n+1) with y orthogonal to W_n, case (b)
    for u_(n+1) − u_n + A_(n+1) x + B_(n+1) y ∈ K_(n+1) with x orthogonal to
    V_n and y ∈ W_n. Failures are report entries, not exceptions.
    """
    if levels_checked < 1:
        raise ValueError('levels_checked must be at least 1')
    tol = get_setting('RESIDUAL_TOLERANCE')
    slack_tol = get_setting('MEMBERSHIP_TOLERANCE')
    n0 = description.n0

    residuals = morphism_residuals(description)
    hypotheses = {}
    for name, residual in residuals.items():
        scale = max(1.0, _operator_norm(description, name))
        hypotheses[name] = HypothesisCheck(name, residual <= tol * scale, residual)

    u_residual = invariance_residual(description.seq_u, n0, description.u0)
    u_free = HypothesisCheck('u_free', u_residual <= tol * max(1.0, np.linalg.norm(description.u0)),
                             u_residual)
    if u_free.passed and description.flags.u_extension is UExtension.EXTEND:
        try:
            extend_invariant(description.seq_u, description.u0, n0, n0 + 1)
        except (NonUniqueExtension, NotExtendable) as exc:
            u_free.passed = False
            u_free.detail = str(exc)
    hypotheses['u_free'] = u_free

    odd_kinds = sorted(kind.value for kind in description.cone.kinds - COMPATIBLE_KINDS)
    hypotheses['cones_compatible'] = HypothesisCheck(
        'cones_compatible', not odd_kinds, 0.0,
        f'no compatibility rule for {", ".join(odd_kinds)}' if odd_kinds else '',
    )

    levels = []
    if u_free.passed:
        for n in range(n0, n0 + levels_checked):
            try:
                levels.append(_level_checks(description, n))
            except (NonUniqueExtension, NotExtendable) as exc:
                logger.warning('cannot instantiate level %d for the certificate: %s', n + 1, exc)
                hypotheses['u_free'].passed = False
                hypotheses['u_free'].detail = str(exc)
                break
    closed_form = _closed_form(description, levels) if hypotheses['u_free'].passed else ''
    all_levels = len(levels) == levels_checked

    def passed(*names):
        return all(hypotheses[name].passed for name in names)

    def level_verdict(case):
        if closed_form:
            return Verdict.CERTIFIED
        slacks = [getattr(check, f'case_{case}_slack') for check in levels]
        if all_levels and all(slack <= slack_tol for slack in slacks):
            return Verdict.CERTIFIED_UP_TO
        return Verdict.FAILED

    morphisms_a = passed('a_morphism', 'b_morphism', 'b_adjoint', 'u_free')
    if not passed('cones_compatible'):
        intersection = projection_verdict = Verdict.NOT_APPLICABLE
        projection_case = ''
    else:
        intersection = level_verdict('a') if morphisms_a else Verdict.FAILED
        projection_verdict, projection_case = Verdict.FAILED, ''
        if morphisms_a and passed('a_adjoint') and intersection is not Verdict.FAILED:
            projection_verdict, projection_case = intersection, 'a'
        elif passed('a_morphism', 'a_adjoint', 'b_morphism', 'b_adjoint', 'u_free'):
            verdict = level_verdict('b')
            if verdict is not Verdict.FAILED:
                projection_verdict, projection_case = verdict, 'b'

    report = CompatibilityReport(
        hypotheses,
        levels,
        intersection,
        projection_verdict,
        projection_case,
        n0 + levels_checked,
        closed_form,
    )
    logger.info(
        'compatibility of %s: intersection %s, projection %s',
        description.name or 'description', intersection.value, projection_verdict.value,
    )
    return report
