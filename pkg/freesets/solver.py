"""
Conic programs and their solution through cvxpy.

A program is

    minimize    c^T z + constant
    subject to  E z = f
                G z + h ∈ K_1 × ... × K_r

with cones given by ConeBlock entries. PSD blocks use svec coordinates
(scaled upper triangle, row-major, sqrt(2) off the diagonal); exponential
blocks follow cvxpy's ExpCone ordering (x, y, z) with y exp(x / y) <= z.
Relative entropy blocks hold (ν, c, t) and are lowered to exponential cones
before solving.
"""

import ast
import io
import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from math import comb

import cvxpy as cp
import numpy as np
from scipy import sparse

from .exceptions import Infeasible, InvalidExpression, NumericalFailure, Unbounded
from .utils import get_setting, svec, svec_to_smat_operator

logger = logging.getLogger(__name__)


class ConeKind(str, Enum):
    ZERO = 'zero'
    NONNEG = 'nonneg'
    PSD = 'psd'
    SOC = 'soc'
    EXP = 'exp'
    RELENT = 'relent'


@dataclass(frozen=True)
class ConeBlock:
    """
    One factor of a product cone.

    ``size`` is the vector length for zero, nonneg and soc blocks, the
    matrix order for psd, the number of cones for exp and the number of
    (ν, c) pairs for relent.
    """

    kind: ConeKind
    size: int
    weights: tuple = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', ConeKind(self.kind))
        if self.size < 0:
            raise ValueError('cone size must be nonnegative')
        if self.weights is not None:
            object.__setattr__(self, 'weights', tuple(float(w) for w in self.weights))

    @property
    def rows(self):
        if self.kind is ConeKind.PSD:
            return self.size * (self.size + 1) // 2
        if self.kind is ConeKind.EXP:
            return 3 * self.size
        if self.kind is ConeKind.RELENT:
            return 2 * self.size + 1
        return self.size

    def entropy_weights(self):
        if self.weights is None:
            return np.ones(self.size)
        return np.asarray(self.weights)

    def __str__(self):
        if self.weights is not None:
            return f'{self.kind.value}({self.size}; weighted)'
        return f'{self.kind.value}({self.size})'


def cone_rows(cones):
    return int(sum(block.rows for block in cones))


def block_slices(cones):
    """Row slices of each block."""
    slices, start = [], 0
    for block in cones:
        slices.append(slice(start, start + block.rows))
        start += block.rows
    return slices


@dataclass(eq=False)
class ConicProgram:
    objective: np.ndarray
    cone_matrix: sparse.csr_matrix
    cone_offset: np.ndarray
    cones: tuple
    eq_matrix: sparse.csr_matrix = None
    eq_rhs: np.ndarray = None
    constant: float = 0.0
    maximize: bool = False
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        nvars = len(self.objective)
        self.cones = tuple(self.cones)
        self.cone_matrix = sparse.csr_matrix(self.cone_matrix, shape=self.cone_matrix.shape)
        self.cone_offset = np.asarray(self.cone_offset, dtype=float).ravel()
        if self.eq_matrix is None:
            self.eq_matrix = sparse.csr_matrix((0, nvars))
            self.eq_rhs = np.zeros(0)
        self.eq_matrix = sparse.csr_matrix(self.eq_matrix)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).ravel()
        rows = cone_rows(self.cones)
        if self.cone_matrix.shape != (rows, nvars) or len(self.cone_offset) != rows:
            raise ValueError(
                f'cone data has shape {self.cone_matrix.shape}/{len(self.cone_offset)}, '
                f'expected ({rows}, {nvars})'
            )
        if self.eq_matrix.shape[1] != nvars or self.eq_matrix.shape[0] != len(self.eq_rhs):
            raise ValueError('equality data is inconsistent with the variable count')

    @property
    def num_variables(self):
        return len(self.objective)

    def cone_value(self, z):
        return np.asarray(self.cone_matrix @ z).ravel() + self.cone_offset


@dataclass
class SolveResult:
    status: str
    objective: float
    primal: np.ndarray
    duals: list
    backend_status: str


def lower_relative_entropy(program):
    """
    Replace every relent block by exponential cones and one aggregation row.

    Each pair gets an auxiliary q_j with (−q_j, ν_j, c_j) in the exponential
    cone, so q_j >= ν_j log(ν_j / c_j), and the row t − Σ w_j q_j >= 0 closes
    the block. Auxiliary variables are appended after the original ones.
    """
    if not any(block.kind is ConeKind.RELENT for block in program.cones):
        return program
    nvars = program.num_variables
    extra = sum(block.size for block in program.cones if block.kind is ConeKind.RELENT)
    total = nvars + extra

    rows, offsets, cones = [], [], []
    next_aux = nvars
    for block, rows_slice in zip(program.cones, block_slices(program.cones)):
        g = program.cone_matrix[rows_slice]
        h = program.cone_offset[rows_slice]
        if block.kind is not ConeKind.RELENT:
            rows.append(sparse.hstack([g, sparse.csr_matrix((g.shape[0], extra))], format='csr'))
            offsets.append(h)
            cones.append(block)
            continue
        size = block.size
        aux = np.arange(next_aux, next_aux + size)
        next_aux += size
        nu_rows = sparse.hstack([g[:size], sparse.csr_matrix((size, extra))], format='csr')
        c_rows = sparse.hstack([g[size:2 * size], sparse.csr_matrix((size, extra))], format='csr')
        t_row = sparse.hstack([g[2 * size:], sparse.csr_matrix((1, extra))], format='csr')
        neg_q = sparse.csr_matrix((-np.ones(size), (np.arange(size), aux)), shape=(size, total))
        stacked = sparse.vstack([neg_q, nu_rows, c_rows], format='csr')
        order = np.arange(3 * size).reshape(3, size).T.ravel()
        rows.append(stacked[order])
        offsets.append(np.concatenate([np.zeros(size), h[:size], h[size:2 * size]])[order])
        cones.append(ConeBlock(ConeKind.EXP, size))
        weights = block.entropy_weights()
        aggregate = t_row - sparse.csr_matrix(
            (weights, (np.zeros(size, dtype=int), aux)), shape=(1, total)
        )
        rows.append(sparse.csr_matrix(aggregate))
        offsets.append(h[2 * size:])
        cones.append(ConeBlock(ConeKind.NONNEG, 1))

    eq_matrix = sparse.hstack(
        [program.eq_matrix, sparse.csr_matrix((program.eq_matrix.shape[0], extra))], format='csr'
    )
    return replace(
        program,
        objective=np.concatenate([program.objective, np.zeros(extra)]),
        cone_matrix=sparse.vstack(rows, format='csr'),
        cone_offset=np.concatenate(offsets),
        cones=tuple(cones),
        eq_matrix=eq_matrix,
        eq_rhs=program.eq_rhs,
    )


def _constraints(z, program):
    expression = program.cone_matrix @ z + program.cone_offset
    constraints = []
    for block, rows in zip(program.cones, block_slices(program.cones)):
        if block.rows == 0:
            continue
        segment = expression[rows]
        if block.kind is ConeKind.ZERO:
            constraints.append(segment == 0)
        elif block.kind is ConeKind.NONNEG:
            constraints.append(segment >= 0)
        elif block.kind is ConeKind.SOC and block.rows == 1:
            constraints.append(segment >= 0)
        elif block.kind is ConeKind.SOC:
            constraints.append(cp.SOC(segment[0], segment[1:]))
        elif block.kind is ConeKind.PSD:
            expand = svec_to_smat_operator(block.size)
            matrix = cp.reshape(expand @ segment, (block.size, block.size), order='F')
            constraints.append((matrix + matrix.T) / 2 >> 0)
        elif block.kind is ConeKind.EXP:
            constraints.append(cp.ExpCone(segment[0::3], segment[1::3], segment[2::3]))
        else:
            raise ValueError(f'unlowered cone {block.kind}')
    if program.eq_matrix.shape[0]:
        constraints.append(program.eq_matrix @ z == program.eq_rhs)
    return constraints


def _solver_name():
    name = get_setting('SOLVER')
    if name and name.upper() in cp.installed_solvers():
        return name.upper()
    if name:
        logger.warning('solver %s is not installed; letting cvxpy choose', name)
    return None


def solve(program):
    """
    Solve a conic program.

    Args:
        program: ConicProgram

    Returns:
        SolveResult with the primal variable values and objective

    Raises:
        Infeasible, Unbounded, NumericalFailure: with the backend status
    """
    lowered = lower_relative_entropy(program)
    z = cp.Variable(lowered.num_variables)
    sign = -1.0 if lowered.maximize else 1.0
    objective = cp.Minimize(sign * (lowered.objective @ z))
    constraints = _constraints(z, lowered)
    problem = cp.Problem(objective, constraints)
    try:
        problem.solve(solver=_solver_name())
    except cp.error.SolverError as exc:
        raise NumericalFailure('solver_error', str(exc)) from exc

    status = problem.status
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        raise Infeasible(status)
    if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        raise Unbounded(status)
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or z.value is None:
        raise NumericalFailure(status)
    if status == cp.OPTIMAL_INACCURATE:
        logger.warning('solver reported %s', status)

    primal = np.asarray(z.value, dtype=float)[: program.num_variables]
    value = float(program.objective @ primal) + program.constant
    duals = [constraint.dual_value for constraint in constraints]
    return SolveResult('optimal', value, primal, duals, status)


# Sparse text dump


def _write_vector(stream, label, vector, length_prefix=None):
    index = np.flatnonzero(vector)
    prefix = f' {length_prefix}' if length_prefix is not None else ''
    stream.write(f'{label}{prefix} {len(index)}\n')
    for i in index:
        stream.write(f'{i} {float(vector[i])!r}\n')


def _write_matrix(stream, label, matrix):
    coo = sparse.coo_matrix(matrix)
    stream.write(f'{label} {matrix.shape[0]} {coo.nnz}\n')
    order = np.lexsort((coo.col, coo.row))
    for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
        stream.write(f'{i} {j} {float(v)!r}\n')


def dump_program(program, stream=None):
    """
    Write a program as sparse text: a header with sizes, then triplets.

    Returns:
        str when no stream is given
    """
    own = stream is None
    stream = io.StringIO() if own else stream
    stream.write('# freesets conic program v1\n')
    stream.write(f'variables {program.num_variables}\n')
    stream.write(f'sense {"maximize" if program.maximize else "minimize"}\n')
    stream.write(f'constant {float(program.constant)!r}\n')
    _write_vector(stream, 'objective', program.objective)
    stream.write(f'cones {len(program.cones)}\n')
    for block in program.cones:
        weights = ''
        if block.weights is not None:
            weights = ' ' + ' '.join(repr(w) for w in block.weights)
        stream.write(f'{block.kind.value} {block.size}{weights}\n')
    _write_matrix(stream, 'cone_matrix', program.cone_matrix)
    _write_vector(stream, 'cone_offset', program.cone_offset)
    _write_matrix(stream, 'equalities', program.eq_matrix)
    _write_vector(stream, 'rhs', program.eq_rhs)
    if own:
        return stream.getvalue()
    return None


def load_program(text):
    """Inverse of dump_program."""
    lines = [line for line in text.splitlines() if line.strip() and not line.startswith('#')]
    position = 0

    def next_fields(keyword):
        nonlocal position
        fields = lines[position].split()
        if fields[0] != keyword:
            raise ValueError(f'expected {keyword!r} at program line {position + 1}')
        position += 1
        return fields[1:]

    nvars = int(next_fields('variables')[0])
    maximize = next_fields('sense')[0] == 'maximize'
    constant = float(next_fields('constant')[0])

    def read_vector(keyword, length):
        nonlocal position
        count = int(next_fields(keyword)[-1])
        vector = np.zeros(length)
        for _ in range(count):
            i, v = lines[position].split()
            vector[int(i)] = float(v)
            position += 1
        return vector

    def read_matrix(keyword, cols):
        nonlocal position
        rows_count, nnz = (int(x) for x in next_fields(keyword))
        entries = [lines[position + k].split() for k in range(nnz)]
        position += nnz
        if entries:
            i, j, v = zip(*entries)
            return sparse.csr_matrix(
                (np.array(v, dtype=float), (np.array(i, dtype=int), np.array(j, dtype=int))),
                shape=(rows_count, cols),
            )
        return sparse.csr_matrix((rows_count, cols))

    objective = read_vector('objective', nvars)
    cone_count = int(next_fields('cones')[0])
    cones = []
    for _ in range(cone_count):
        fields = lines[position].split()
        position += 1
        weights = tuple(float(w) for w in fields[2:]) or None
        cones.append(ConeBlock(ConeKind(fields[0]), int(fields[1]), weights))
    cone_matrix = read_matrix('cone_matrix', nvars)
    cone_offset = read_vector('cone_offset', cone_matrix.shape[0])
    eq_matrix = read_matrix('equalities', nvars)
    eq_rhs = read_vector('rhs', eq_matrix.shape[0])
    return ConicProgram(
        objective, cone_matrix, cone_offset, tuple(cones), eq_matrix, eq_rhs, constant, maximize
    )


# Cone blocks sized by level

_SIZE_NAMES = {'n'}
_SIZE_FUNCTIONS = {'C': comb, 'comb': comb}
_IMPLICIT_PRODUCT = re.compile(r'(\d)\s*(?=[A-Za-z(])')


def _evaluate_size(node, n):
    if isinstance(node, ast.Expression):
        return _evaluate_size(node.body, n)
    if isinstance(node, ast.Constant) and isinstance(node.value, int):
        return node.value
    if isinstance(node, ast.Name) and node.id in _SIZE_NAMES:
        return n
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_evaluate_size(node.operand, n)
    if isinstance(node, ast.BinOp):
        left, right = _evaluate_size(node.left, n), _evaluate_size(node.right, n)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Pow):
            return left**right
        if isinstance(node.op, ast.FloorDiv):
            return left // right
    if (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id in _SIZE_FUNCTIONS
        and len(node.args) == 2
    ):
        return _SIZE_FUNCTIONS[node.func.id](*(_evaluate_size(arg, n) for arg in node.args))
    raise InvalidExpression(f'unsupported size expression {ast.dump(node)}')


@dataclass(frozen=True)
class ConeTerm:
    """A cone block whose size is an integer expression in the level n, e.g. ``2n+1``."""

    kind: ConeKind
    size: str
    weights: tuple = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', ConeKind(self.kind))
        object.__setattr__(self, 'size', str(self.size).replace(' ', ''))
        self._tree()

    def _tree(self):
        text = _IMPLICIT_PRODUCT.sub(r'\1*', self.size).replace('^', '**')
        try:
            return ast.parse(text, mode='eval')
        except SyntaxError:
            raise InvalidExpression(f'cannot parse cone size {self.size!r}') from None

    def size_at(self, n):
        value = _evaluate_size(self._tree(), n)
        if value < 0:
            raise InvalidExpression(f'cone size {self.size!r} is negative at level {n}')
        return int(value)

    def at(self, n):
        return ConeBlock(self.kind, self.size_at(n), self.weights)

    def __str__(self):
        if self.weights is not None:
            return f'{self.kind.value}({self.size}; {" ".join(repr(w) for w in self.weights)})'
        return f'{self.kind.value}({self.size})'


@dataclass(frozen=True)
class ConeSpec:
    """Ordered product of cone blocks, instantiable at every level."""

    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, 'blocks', tuple(self.blocks))

    def at(self, n):
        return tuple(term.at(n) for term in self.blocks)

    def rows(self, n):
        return cone_rows(self.at(n))

    @property
    def kinds(self):
        return {term.kind for term in self.blocks}

    def __str__(self):
        return ' + '.join(str(term) for term in self.blocks)

    @classmethod
    def parse(cls, text):
        """
        Parse ``nonneg(2n+1) + zero(n)``; blocks are separated by ``+`` outside
        parentheses, relent weights follow a semicolon.
        """
        blocks, depth, start = [], 0, 0
        pieces = []
        for i, char in enumerate(text):
            if char == '(':
                depth += 1
            elif char == ')':
                depth -= 1
            elif char == '+' and depth == 0:
                pieces.append(text[start:i])
                start = i + 1
        pieces.append(text[start:])
        for piece in pieces:
            match = re.fullmatch(r'\s*([a-z]+)\s*\((.*)\)\s*', piece)
            if match is None:
                raise InvalidExpression(f'cannot parse cone block {piece.strip()!r}')
            kind, argument = match.groups()
            if kind not in {k.value for k in ConeKind}:
                raise InvalidExpression(f'unknown cone kind {kind!r}')
            size, _, weights = argument.partition(';')
            weights = tuple(float(w) for w in weights.replace(',', ' ').split()) or None
            blocks.append(ConeTerm(ConeKind(kind), size, weights))
        return cls(tuple(blocks))


def cone_identity(cones):
    """A canonical interior direction of each block: ones, the identity, (0, 1, e) or zero."""
    pieces = []
    for block in cones:
        if block.kind is ConeKind.NONNEG:
            pieces.append(np.ones(block.size))
        elif block.kind is ConeKind.PSD:
            pieces.append(svec(np.eye(block.size)))
        elif block.kind is ConeKind.SOC:
            pieces.append(np.eye(1, block.size).ravel() if block.size else np.zeros(0))
        elif block.kind is ConeKind.EXP:
            pieces.append(np.tile([0.0, 1.0, np.e], block.size))
        elif block.kind is ConeKind.RELENT:
            pieces.append(np.concatenate([np.ones(2 * block.size), [1.0]]))
        else:
            pieces.append(np.zeros(block.size))
    return np.concatenate(pieces) if pieces else np.zeros(0)


def dual_cone(cones):
    """
    Rows D and blocks K' with ζ ∈ K* exactly when D ζ ∈ K'.

    Zero blocks are unconstrained; nonneg, psd and soc blocks are
    self-dual in svec coordinates. An exponential triple (u, v, w) is dual
    feasible when (−v, −u, e w) lies in the exponential cone, and a relent
    block (a, b, γ) when every (−a_j, γ w_j, e b_j) does.
    """
    rows, cols, vals, blocks = [], [], [], []
    row = 0
    total = cone_rows(cones)
    for block, where in zip(cones, block_slices(cones)):
        start = where.start
        if block.kind in (ConeKind.NONNEG, ConeKind.PSD, ConeKind.SOC):
            count = block.rows
            rows.extend(range(row, row + count))
            cols.extend(range(start, start + count))
            vals.extend([1.0] * count)
            row += count
            blocks.append(ConeBlock(block.kind, block.size))
        elif block.kind is ConeKind.EXP:
            for j in range(block.size):
                u, v, w = start + 3 * j, start + 3 * j + 1, start + 3 * j + 2
                rows.extend([row, row + 1, row + 2])
                cols.extend([v, u, w])
                vals.extend([-1.0, -1.0, np.e])
                row += 3
            blocks.append(ConeBlock(ConeKind.EXP, block.size))
        elif block.kind is ConeKind.RELENT:
            size = block.size
            gamma = start + 2 * size
            for j, weight in enumerate(block.entropy_weights()):
                rows.extend([row, row + 1, row + 2])
                cols.extend([start + j, gamma, start + size + j])
                vals.extend([-1.0, weight, np.e])
                row += 3
            blocks.append(ConeBlock(ConeKind.EXP, size))
            rows.append(row)
            cols.append(gamma)
            vals.append(1.0)
            row += 1
            blocks.append(ConeBlock(ConeKind.NONNEG, 1))
    matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(row, total))
    return matrix, tuple(blocks)
