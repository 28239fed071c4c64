"""
Fitting free descriptions to gauge-function evaluation data.

The fit minimizes ‖ε‖ over the coefficients of A and B in a basis of
equivariant maps or morphisms, λ >= λ_min and the witnesses of the primal
and dual gauge programs, subject to

    (t_i, y_i) feasible for the primal program with cost <= 1 + ε_i
    z_i feasible for the dual program with cost >= 1 − ε_i

on normalized data (every target equal to one). The bilinear program is
handled by alternating minimization: step 1 fixes the description and
solves both gauge programs per data point, step 2 fixes y_i and z_i and
solves one conic program over the coefficients, λ, ε and t_i. When u is
learned t_i u is bilinear, so every round makes two passes: one with u
held and t_i free, then one with t_i held and u free. The second pass pins
the scale of u.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import sparse

from .descriptions import (
    DescriptionFlags,
    FreeDescription,
    UExtension,
    dual_gauge_program,
    gauge,
    primal_gauge_program,
)
from .equivariant import (
    ConstraintClass,
    equivariant_basis,
    invariant_basis,
    map_weights,
    morphism_basis,
    vectorize,
)
from .exceptions import (
    AllRestartsFailed,
    EmptyBasis,
    InvalidLevel,
    InvalidTarget,
    SolverError,
)
from .operators import EquivariantOperator
from .sequences import embedding
from .solver import ConeBlock, ConeKind, ConicProgram, block_slices, cone_identity, solve
from .utils import get_setting, sym_entries

logger = logging.getLogger(__name__)

PERFECT_FIT = 1e-9
TIE_TOLERANCE = 1e-8
DEFAULT_INITIAL_LAMBDA = 0.1


class UMode(str, Enum):
    IDENTITY = 'identity'
    FIXED = 'fixed'
    LEARN = 'learn'


class CostNorm(str, Enum):
    L2 = 'l2'
    L1 = 'l1'
    LINF = 'linf'


@dataclass
class Dataset:
    """Records (n_i, x_i ∈ V_{n_i}, y_i) with x_i in canonical coordinates."""

    levels: list
    points: list
    targets: np.ndarray

    def __post_init__(self):
        self.levels = [int(n) for n in self.levels]
        self.points = [np.asarray(x, dtype=float).ravel() for x in self.points]
        self.targets = np.asarray(self.targets, dtype=float).ravel()
        if not (len(self.levels) == len(self.points) == len(self.targets)):
            raise ValueError('levels, points and targets must have equal length')

    def __len__(self):
        return len(self.targets)

    def by_level(self):
        grouped = {}
        for i, n in enumerate(self.levels):
            grouped.setdefault(n, []).append(i)
        return dict(sorted(grouped.items()))


@dataclass
class RegressionProblem:
    seq_v: object
    seq_w: object
    seq_u: object
    cone: object
    n0: int
    data: Dataset
    constraint: ConstraintClass = ConstraintClass.EQUIVARIANT
    u_mode: UMode = UMode.IDENTITY
    u_fixed: np.ndarray = None
    lambda_min: float = None
    lam: float = None
    restarts: int = None
    max_alternations: int = None
    stall_tolerance: float = None
    stall_rounds: int = None
    norm: CostNorm = CostNorm.L2
    seed: int = 0
    jobs: int = 1
    initial: FreeDescription = None
    scales: np.ndarray = None
    name: str = 'fit'

    def __post_init__(self):
        self.constraint = ConstraintClass(self.constraint)
        if self.constraint is ConstraintClass.INVARIANT:
            raise ValueError('A and B are maps; use equivariant or a morphism class')
        self.u_mode = UMode(self.u_mode)
        self.norm = CostNorm(self.norm)
        defaults = {
            'lambda_min': 'LAMBDA_MIN',
            'restarts': 'RESTARTS',
            'max_alternations': 'MAX_ALTERNATIONS',
            'stall_tolerance': 'STALL_TOLERANCE',
            'stall_rounds': 'STALL_ROUNDS',
        }
        for attribute, setting in defaults.items():
            if getattr(self, attribute) is None:
                setattr(self, attribute, get_setting(setting))
        if self.lambda_min < 0:
            raise ValueError('lambda_min must be nonnegative')
        if self.lam is not None and self.lam < self.lambda_min:
            raise ValueError('a fixed λ must be at least lambda_min')
        if self.u_mode is UMode.FIXED and self.u_fixed is None:
            raise ValueError('u_mode=fixed needs u_fixed')
        if self.restarts < 1:
            raise ValueError('restarts must be positive')

    @property
    def normalized(self):
        return self.scales is not None


@dataclass
class FitResult:
    description: FreeDescription
    lam: float
    residuals: np.ndarray
    trace: list
    restart: int
    seed: int
    coefficients: dict = field(default_factory=dict)
    failed_restarts: int = 0

    @property
    def objective(self):
        return self.trace[-1] if self.trace else float('nan')

    def metrics(self):
        """Plain data for the metrics sidecar."""
        return {
            'objective': float(self.objective),
            'lambda': float(self.lam),
            'residuals': [float(e) for e in self.residuals],
            'trace': [float(v) for v in self.trace],
            'restart': self.restart,
            'failed_restarts': self.failed_restarts,
            'seed': self.seed,
            'tolerances': {
                name: get_setting(name)
                for name in (
                    'RESIDUAL_TOLERANCE', 'MEMBERSHIP_TOLERANCE', 'STALL_TOLERANCE',
                    'STALL_ROUNDS', 'MAX_ALTERNATIONS', 'LAMBDA_MIN', 'SOLVER',
                )
            },
        }


def normalize_data(problem):
    """
    Embed every point into V_{n0} and scale it so that its target becomes 1.

    Raises:
        InvalidTarget: a target is not positive
        InvalidLevel: a point lives above n0
    """
    data = problem.data
    if np.any(data.targets <= 0):
        bad = int(np.flatnonzero(data.targets <= 0)[0])
        raise InvalidTarget(f'target {data.targets[bad]!r} of record {bad} is not positive')
    points = []
    for n, x in zip(data.levels, data.points):
        if n > problem.n0:
            raise InvalidLevel(f'data at level {n} is above n0={problem.n0}')
        if len(x) != problem.seq_v.dim(n):
            raise InvalidLevel(f'a level-{n} point has length {len(x)}')
        if n < problem.n0:
            x = np.asarray(embedding(problem.seq_v, n, problem.n0).matrix @ x).ravel()
        points.append(x)
    scales = data.targets.copy()
    normalized = Dataset(
        [problem.n0] * len(data),
        [x / y for x, y in zip(points, scales)],
        np.ones(len(data)),
    )
    return replace(problem, data=normalized, scales=scales)


# Bases and coefficient spaces


def _map_basis(source, target, n0, constraint):
    if source.dim(n0) == 0:
        return None
    if constraint is ConstraintClass.EQUIVARIANT:
        return equivariant_basis(source, target, n0)
    return morphism_basis(
        source, target, n0, with_adjoint=constraint is ConstraintClass.MORPHISM_WITH_ADJOINT
    )


def _orthonormal_maps(basis, root_source, root_target):
    scale_rows = sparse.diags(root_target)
    scale_cols = sparse.diags(1.0 / root_source)
    return [
        sparse.csr_matrix(scale_rows @ basis.element(k).matrix @ scale_cols)
        for k in range(basis.dimension)
    ]


def _project(basis, operator):
    """Coefficients of an operator in a metric-orthonormal basis of maps."""
    weights = map_weights(operator.source, operator.target, operator.source_level)
    return np.asarray(basis.vectors.T @ (weights * vectorize(operator))).ravel()


class _Fitter:
    """Data shared by every restart of one fit."""

    def __init__(self, problem):
        self.problem = problem
        n0 = problem.n0
        self.cones = problem.cone.at(n0)
        self.root_v = np.sqrt(np.asarray(problem.seq_v.weights(n0)))
        self.root_w = np.sqrt(np.asarray(problem.seq_w.weights(n0)))
        self.root_u = np.sqrt(np.asarray(problem.seq_u.weights(n0)))
        self.dim_u = len(self.root_u)
        self.dim_w = len(self.root_w)

        self.basis_a = _map_basis(problem.seq_v, problem.seq_u, n0, problem.constraint)
        self.basis_b = _map_basis(problem.seq_w, problem.seq_u, n0, problem.constraint)
        maps_a = _orthonormal_maps(self.basis_a, self.root_v, self.root_u) if self.basis_a else []
        self.maps_b = (
            _orthonormal_maps(self.basis_b, self.root_w, self.root_u) if self.basis_b else []
        )
        self.points = [self.root_v * x for x in problem.data.points]

        self.keep_a = np.arange(len(maps_a))
        if maps_a:
            norms = np.array(
                [max(np.linalg.norm(m @ x) for x in self.points) for m in maps_a]
            )
            self.keep_a = np.flatnonzero(norms > 1e-10)
            if len(self.keep_a) < len(maps_a):
                logger.info(
                    'dropping %d basis maps for A that vanish on the data',
                    len(maps_a) - len(self.keep_a),
                )
        self.maps_a = [maps_a[k] for k in self.keep_a]
        self.columns = [
            np.column_stack([m @ x for m in self.maps_a]) if self.maps_a
            else np.zeros((self.dim_u, 0))
            for x in self.points
        ]

        self.basis_u = None
        self.u_columns = np.zeros((self.dim_u, 0))
        if problem.u_mode is UMode.LEARN:
            self.basis_u = invariant_basis(problem.seq_u, n0)
            if self.basis_u.dimension:
                self.u_columns = np.column_stack(
                    [self.root_u * self.basis_u.element(k) for k in range(self.basis_u.dimension)]
                )
        elif problem.u_mode is UMode.FIXED:
            self.u_fixed = self.root_u * np.asarray(problem.u_fixed, dtype=float)
        else:
            self.u_fixed = cone_identity(self.cones)

        if not self.maps_a:
            raise EmptyBasis('no basis maps for A remain')
        self.has_lambda = bool(self.maps_b) and problem.lam is None

    @property
    def learn_u(self):
        return self.problem.u_mode is UMode.LEARN

    def u_bar(self, gamma):
        return self.u_columns @ gamma if self.learn_u else self.u_fixed

    def b_bar(self, beta):
        if not self.maps_b:
            return sparse.csr_matrix((self.dim_u, self.dim_w))
        return sparse.csr_matrix(sum(c * m for c, m in zip(beta, self.maps_b)))

    # Initial points

    def initial_state(self, restart):
        problem = self.problem
        lam = problem.lam if problem.lam is not None else max(
            problem.lambda_min, DEFAULT_INITIAL_LAMBDA
        )
        if restart == 0 and problem.initial is not None:
            start = problem.initial
            alpha = _project(self.basis_a, start.a0)[self.keep_a]
            beta = _project(self.basis_b, start.b0) if self.basis_b else np.zeros(0)
            gamma = np.zeros(0)
            if self.learn_u:
                weights = np.asarray(problem.seq_u.weights(problem.n0))
                gamma = np.asarray(self.basis_u.vectors.T @ (weights * start.u0)).ravel()
            if problem.lam is None:
                lam = max(problem.lambda_min, start.regularization)
            return alpha, beta, gamma, lam
        rng = np.random.default_rng([problem.seed, restart])
        alpha = rng.standard_normal(len(self.maps_a))
        alpha /= np.linalg.norm(alpha)
        beta = rng.standard_normal(len(self.maps_b))
        gamma = np.zeros(0)
        if self.learn_u:
            gamma = self.u_columns.T @ cone_identity(self.cones)
        return alpha, beta, gamma, lam

    # Alternation steps

    def witnesses(self, alpha, beta, gamma, lam):
        """Step 1: optimal (t_i, y_i) and z_i for the current description."""
        b_bar = self.b_bar(beta)
        u_bar = self.u_bar(gamma)

        def solve_point(columns):
            offset = columns @ alpha
            primal = solve(primal_gauge_program(offset, b_bar, u_bar, self.cones, lam))
            dual = solve(dual_gauge_program(offset, b_bar, u_bar, self.cones, lam))
            t = float(primal.primal[0])
            y = primal.primal[1:1 + self.dim_w]
            return t, y, dual.primal, primal.objective, dual.objective

        if self.problem.jobs > 1 and self.problem.restarts == 1:
            with ThreadPoolExecutor(max_workers=self.problem.jobs) as pool:
                return list(pool.map(solve_point, self.columns))
        return [solve_point(columns) for columns in self.columns]

    def coefficient_program(self, witnesses, gamma_fixed, lam_fixed, fixed_u=False):
        """
        Step 2: one conic program over the coefficients for fixed witnesses.

        With a learned u the program either holds u at gamma_fixed and frees
        t_i (``fixed_u``), or frees u and holds t_i. In the latter case the
        component of gamma along gamma_fixed is pinned.
        """
        count = len(witnesses)
        learn = self.learn_u and not fixed_u
        layout = {'alpha': len(self.maps_a), 'beta': len(self.maps_b)}
        if learn:
            layout['gamma'] = self.u_columns.shape[1]
        if self.has_lambda:
            layout['lambda'] = 1
        if not learn:
            layout['t'] = count
        layout['eps'] = count
        if self.problem.norm is not CostNorm.L1:
            layout['s'] = 1
        layout = {name: size for name, size in layout.items() if size}
        offsets, total = {}, 0
        for name, size in layout.items():
            offsets[name] = total
            total += size

        g_blocks, h_blocks, blocks = [], [], []

        def add(pieces, h, block):
            rows = len(h)
            columns = []
            for name, size in layout.items():
                piece = pieces.get(name)
                columns.append(
                    sparse.csr_matrix(piece) if piece is not None
                    else sparse.csr_matrix((rows, size))
                )
            g_blocks.append(sparse.hstack(columns, format='csr'))
            h_blocks.append(np.asarray(h, dtype=float))
            blocks.append(block)

        def unit(name, index, rows=1, row=0):
            matrix = np.zeros((rows, layout[name]))
            matrix[row, index] = 1.0
            return matrix

        u_fixed = None if learn else self.u_bar(gamma_fixed)
        lam_value = lam_fixed if not self.has_lambda else None
        for i, (t, y, z, _, _) in enumerate(witnesses):
            columns = self.columns[i]
            y_norm = float(np.linalg.norm(y))

            pieces = {'alpha': columns}
            if self.maps_b:
                pieces['beta'] = np.column_stack([m @ y for m in self.maps_b])
            if learn:
                pieces['gamma'] = t * self.u_columns
            else:
                t_column = np.zeros((self.dim_u, count))
                t_column[:, i] = u_fixed
                pieces['t'] = t_column
            for block, where in zip(self.cones, block_slices(self.cones)):
                add({k: v[where] for k, v in pieces.items()}, np.zeros(where.stop - where.start),
                    block)

            pieces = {'eps': unit('eps', i)}
            constant = 1.0
            if learn:
                constant -= t
            else:
                pieces['t'] = -unit('t', i)
            if self.has_lambda:
                pieces['lambda'] = np.array([[-y_norm]])
            else:
                constant -= lam_value * y_norm
            add(pieces, [constant], ConeBlock(ConeKind.NONNEG, 1))

            if self.maps_b:
                adjoint = np.column_stack([m.T @ z for m in self.maps_b])
                if self.has_lambda:
                    add(
                        {
                            'lambda': unit('lambda', 0, 1 + self.dim_w),
                            'beta': np.vstack([np.zeros((1, adjoint.shape[1])), adjoint]),
                        },
                        np.zeros(1 + self.dim_w),
                        ConeBlock(ConeKind.SOC, 1 + self.dim_w),
                    )
                elif lam_value > 0:
                    add(
                        {'beta': np.vstack([np.zeros((1, adjoint.shape[1])), adjoint])},
                        np.concatenate([[lam_value], np.zeros(self.dim_w)]),
                        ConeBlock(ConeKind.SOC, 1 + self.dim_w),
                    )
                else:
                    add(
                        {'beta': adjoint}, np.zeros(self.dim_w),
                        ConeBlock(ConeKind.ZERO, self.dim_w),
                    )

            if learn:
                add(
                    {'gamma': -(z @ self.u_columns).reshape(1, -1)},
                    [1.0],
                    ConeBlock(ConeKind.NONNEG, 1),
                )
            add(
                {'alpha': -(z @ columns).reshape(1, -1), 'eps': unit('eps', i)},
                [-1.0],
                ConeBlock(ConeKind.NONNEG, 1),
            )

        add({'eps': np.eye(count)}, np.zeros(count), ConeBlock(ConeKind.NONNEG, count))
        if not learn:
            add({'t': np.eye(count)}, np.zeros(count), ConeBlock(ConeKind.NONNEG, count))
        if self.has_lambda:
            add({'lambda': np.ones((1, 1))}, [-self.problem.lambda_min],
                ConeBlock(ConeKind.NONNEG, 1))
        if learn and np.any(gamma_fixed):
            add({'gamma': gamma_fixed.reshape(1, -1)}, [-float(gamma_fixed @ gamma_fixed)],
                ConeBlock(ConeKind.ZERO, 1))

        objective = np.zeros(total)
        if self.problem.norm is CostNorm.L2:
            objective[offsets['s']] = 1.0
            add(
                {'s': unit('s', 0, 1 + count), 'eps': np.vstack([np.zeros((1, count)),
                                                                 np.eye(count)])},
                np.zeros(1 + count),
                ConeBlock(ConeKind.SOC, 1 + count),
            )
        elif self.problem.norm is CostNorm.LINF:
            objective[offsets['s']] = 1.0
            add({'s': np.ones((count, 1)), 'eps': -np.eye(count)}, np.zeros(count),
                ConeBlock(ConeKind.NONNEG, count))
        else:
            objective[offsets['eps']:offsets['eps'] + count] = 1.0

        program = ConicProgram(
            objective, sparse.vstack(g_blocks, format='csr'), np.concatenate(h_blocks), blocks
        )
        return program, offsets, layout

    def coefficients_step(self, witnesses, gamma, lam, fixed_u=False):
        program, offsets, layout = self.coefficient_program(witnesses, gamma, lam, fixed_u)
        result = solve(program)

        def take(name, default):
            if name not in layout:
                return default
            return result.primal[offsets[name]:offsets[name] + layout[name]]

        alpha = take('alpha', np.zeros(0))
        beta = take('beta', np.zeros(0))
        gamma = take('gamma', gamma)
        if self.has_lambda:
            lam = float(take('lambda', [lam])[0])
        eps = np.maximum(take('eps', np.zeros(len(witnesses))), 0.0)
        return alpha, beta, gamma, lam, eps, _norm(eps, self.problem.norm)

    # Restarts

    def round_steps(self):
        """The fixed_u argument of each coefficient solve in one round."""
        return (True, False) if self.learn_u else (False,)

    def run(self, restart):
        """
        One restart. A solver failure ends the restart with the last completed
        coefficient step, or drops it when no step completed.
        """
        problem = self.problem
        alpha, beta, gamma, lam = self.initial_state(restart)
        trace, outcome = [], None
        try:
            for _ in range(problem.max_alternations):
                for fixed_u in self.round_steps():
                    witnesses = self.witnesses(alpha, beta, gamma, lam)
                    alpha, beta, gamma, lam, eps, value = self.coefficients_step(
                        witnesses, gamma, lam, fixed_u
                    )
                    trace.append(value)
                    outcome = _Outcome(restart, alpha, beta, gamma, lam, eps, trace)
                    if value <= PERFECT_FIT:
                        break
                if trace[-1] <= PERFECT_FIT or _stalled(trace, problem):
                    break
        except SolverError as exc:
            if outcome is None:
                logger.warning('restart %d failed: %s', restart, exc)
                return None
            logger.warning(
                'restart %d stopped after %d steps, keeping the last one: %s',
                restart, len(trace), exc,
            )
            return outcome
        logger.debug('restart %d finished at %.3e after %d steps', restart, trace[-1], len(trace))
        return outcome

    def description(self, outcome):
        problem = self.problem
        n0 = problem.n0
        full_alpha = np.zeros(self.basis_a.dimension)
        full_alpha[self.keep_a] = outcome.alpha
        a0 = self.basis_a.operator(full_alpha)
        if self.basis_b:
            b0 = self.basis_b.operator(outcome.beta)
        else:
            b0 = EquivariantOperator(
                problem.seq_w, problem.seq_u, n0, n0, sparse.csr_matrix((self.dim_u, self.dim_w))
            )
        if self.learn_u:
            u0 = self.basis_u.combine(outcome.gamma)
        else:
            u0 = self.u_fixed / self.root_u
        with_adjoint = problem.constraint is ConstraintClass.MORPHISM_WITH_ADJOINT
        morphism = problem.constraint is not ConstraintClass.EQUIVARIANT
        flags = DescriptionFlags(
            a_morphism=morphism,
            a_adjoint=with_adjoint,
            b_morphism=morphism,
            b_adjoint=with_adjoint,
            u_extension=UExtension.IDENTITY if problem.u_mode is UMode.IDENTITY
            else UExtension.EXTEND,
        )
        return FreeDescription(
            problem.seq_v, problem.seq_w, problem.seq_u, problem.cone, a0, b0, u0, n0, flags,
            outcome.lam if self.maps_b else 0.0, problem.name,
        )


@dataclass
class _Outcome:
    restart: int
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    lam: float
    eps: np.ndarray
    trace: list

    @property
    def objective(self):
        return self.trace[-1]

    @property
    def size(self):
        return float(np.linalg.norm(np.concatenate([self.alpha, self.beta, self.gamma])))


def _norm(eps, norm):
    if norm is CostNorm.L1:
        return float(np.sum(eps))
    if norm is CostNorm.LINF:
        return float(np.max(eps)) if len(eps) else 0.0
    return float(np.linalg.norm(eps))


def _stalled(trace, problem):
    rounds = problem.stall_rounds
    if len(trace) <= rounds:
        return False
    return trace[-1 - rounds] - trace[-1] < problem.stall_tolerance


def _better(candidate, best):
    if best is None:
        return True
    if candidate.objective < best.objective - TIE_TOLERANCE:
        return True
    return abs(candidate.objective - best.objective) <= TIE_TOLERANCE and candidate.size < best.size


def fit(problem, seed=None):
    """
    Fit a free description to the data by alternating minimization.

    Args:
        problem: RegressionProblem; normalized first when it is not already
        seed: overrides problem.seed

    Returns:
        FitResult of the best restart; ties within 1e-8 go to the smallest
        coefficient vector

    Raises:
        EmptyBasis: no basis maps for A
        AllRestartsFailed: every restart ended in a solver failure
    """
    if seed is not None:
        problem = replace(problem, seed=seed)
    if not problem.normalized:
        problem = normalize_data(problem)
    fitter = _Fitter(problem)
    logger.info(
        'fitting %d points with %d A maps, %d B maps and %d restarts',
        len(problem.data), len(fitter.maps_a), len(fitter.maps_b), problem.restarts,
    )
    restarts = range(problem.restarts)
    if problem.jobs > 1 and problem.restarts > 1:
        with ThreadPoolExecutor(max_workers=problem.jobs) as pool:
            outcomes = list(pool.map(fitter.run, restarts))
    else:
        outcomes = [fitter.run(restart) for restart in restarts]

    best = None
    for outcome in outcomes:
        if outcome is not None and _better(outcome, best):
            best = outcome
    failed = sum(outcome is None for outcome in outcomes)
    if best is None:
        raise AllRestartsFailed(f'all {problem.restarts} restarts failed')
    logger.info('best restart %d with objective %.3e', best.restart, best.objective)
    return FitResult(
        fitter.description(best),
        best.lam,
        best.eps,
        best.trace,
        best.restart,
        problem.seed,
        {'alpha': best.alpha, 'beta': best.beta, 'gamma': best.gamma},
        failed,
    )


@dataclass
class LevelError:
    level: int
    count: int
    mean_error: float
    max_error: float


def evaluate_fit(result, dataset, lam=None, jobs=1):
    """
    Mean relative error |f_n(x) − y| / y per level, where f_n is the gauge of
    the extended description.

    Args:
        result: FitResult or FreeDescription
        dataset: Dataset of true values at any levels
    """
    description = result.description if isinstance(result, FitResult) else result
    if np.any(dataset.targets <= 0):
        raise InvalidTarget('true values must be positive')

    def error(i):
        value = gauge(description, dataset.levels[i], dataset.points[i], lam)
        return abs(value - dataset.targets[i]) / dataset.targets[i]

    table = []
    for level, indices in dataset.by_level().items():
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                errors = np.array(list(pool.map(error, indices)))
        else:
            errors = np.array([error(i) for i in indices])
        table.append(LevelError(level, len(indices), float(errors.mean()), float(errors.max())))
        logger.info('level %d: mean relative error %.3e', level, errors.mean())
    return table


# Test functions and samplers


def lp_norm(x, p=np.pi):
    return float(np.sum(np.abs(x) ** p) ** (1.0 / p))


def entropy_variant(matrix):
    """Tr[(X + Tr(X) I) log(X / Tr(X) + I)] for X ⪰ 0."""
    eigenvalues = np.clip(np.linalg.eigvalsh(matrix), 0.0, None)
    trace = eigenvalues.sum()
    if trace <= 0:
        return 0.0
    return float(np.sum((eigenvalues + trace) * np.log(eigenvalues / trace + 1.0)))


def sample_lp_data(levels, count, p=np.pi, seed=0):
    """Gaussian points at levels drawn uniformly from ``levels`` with their ℓ_p norms."""
    rng = np.random.default_rng(seed)
    chosen = rng.choice(list(levels), size=count)
    points = [rng.standard_normal(int(n)) for n in chosen]
    return Dataset(chosen, points, [lp_norm(x, p) for x in points])


def sample_unit_lp_data(levels, count, p=np.pi, seed=0):
    """Points of unit ℓ_2 norm at each level, labelled by their ℓ_p norms."""
    rng = np.random.default_rng(seed)
    levels_out, points = [], []
    for n in levels:
        for _ in range(count):
            x = rng.standard_normal(int(n))
            levels_out.append(int(n))
            points.append(x / np.linalg.norm(x))
    return Dataset(levels_out, points, [lp_norm(x, p) for x in points])


def sample_psd_data(levels, count, seed=0):
    """Wishart matrices in symmetric-entry coordinates with the entropy variant as target."""
    rng = np.random.default_rng(seed)
    chosen = rng.choice(list(levels), size=count)
    points, targets = [], []
    for n in chosen:
        factor = rng.standard_normal((int(n), int(n)))
        matrix = factor @ factor.T / n
        points.append(sym_entries(matrix))
        targets.append(entropy_variant(matrix))
    return Dataset(chosen, points, targets)


def sample_cube_boundary(n, count, seed=0):
    """Points with ‖x‖_∞ = 1, labelled 1."""
    rng = np.random.default_rng(seed)
    points = []
    for _ in range(count):
        x = rng.uniform(-1.0, 1.0, n)
        x[rng.integers(n)] = rng.choice([-1.0, 1.0])
        points.append(x)
    return Dataset([n] * count, points, np.ones(count))
