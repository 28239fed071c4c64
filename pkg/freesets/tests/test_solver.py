import numpy as np
from django.test import SimpleTestCase
from scipy import sparse

from freesets.exceptions import Infeasible, InvalidExpression, Unbounded
from freesets.solver import (
    ConeBlock,
    ConeKind,
    ConeSpec,
    ConicProgram,
    block_slices,
    cone_identity,
    dump_program,
    load_program,
    lower_relative_entropy,
    solve,
)


class ConeSpecTest(SimpleTestCase):
    def test_parse_and_size(self):
        """Test cone specs parse and size their blocks by level"""
        spec = ConeSpec.parse('nonneg(2n+1) + zero(n)')
        self.assertEqual(spec.rows(3), 10)
        self.assertEqual(spec.kinds, {ConeKind.NONNEG, ConeKind.ZERO})
        self.assertEqual(str(spec), 'nonneg(2n+1) + zero(n)')

    def test_psd_rows(self):
        """Test psd blocks of order n use n(n+1)/2 rows"""
        (block,) = ConeSpec.parse('psd(n)').at(3)
        self.assertEqual(block.size, 3)
        self.assertEqual(block.rows, 6)

    def test_binomial_sizes(self):
        """Test sizes may use binomial coefficients"""
        (block,) = ConeSpec.parse('nonneg(C(n, 2))').at(5)
        self.assertEqual(block.size, 10)

    def test_invalid_cone_specs(self):
        """Test unknown kinds and malformed sizes raise InvalidExpression"""
        for text in ('cube(n)', 'nonneg(n', 'nonneg(n/2)'):
            with self.assertRaises(InvalidExpression, msg=text):
                ConeSpec.parse(text).at(4)

    def test_block_slices_and_identity(self):
        """Test row slices and interior directions of a product cone"""
        cones = (ConeBlock('nonneg', 2), ConeBlock('psd', 2))
        self.assertEqual(block_slices(cones), [slice(0, 2), slice(2, 5)])
        np.testing.assert_allclose(cone_identity(cones), [1.0, 1.0, 1.0, 0.0, 1.0])


class SolveTest(SimpleTestCase):
    def setUp(self):
        """Set up test data"""
        self.lp = ConicProgram(
            objective=[1.0, 2.0],
            cone_matrix=sparse.identity(2),
            cone_offset=np.zeros(2),
            cones=(ConeBlock('nonneg', 2),),
            eq_matrix=sparse.csr_matrix([[1.0, 1.0]]),
            eq_rhs=[1.0],
        )

    def test_linear_program(self):
        """Test a small linear program reaches its optimum"""
        result = solve(self.lp)
        self.assertAlmostEqual(result.objective, 1.0, places=6)
        np.testing.assert_allclose(result.primal, [1.0, 0.0], atol=1e-6)

    def test_infeasible(self):
        """Test infeasible programs raise Infeasible"""
        program = ConicProgram(
            objective=[1.0],
            cone_matrix=sparse.identity(1),
            cone_offset=np.zeros(1),
            cones=(ConeBlock('nonneg', 1),),
            eq_matrix=sparse.csr_matrix([[1.0]]),
            eq_rhs=[-1.0],
        )
        with self.assertRaises(Infeasible):
            solve(program)

    def test_unbounded(self):
        """Test unbounded programs raise Unbounded"""
        program = ConicProgram(
            objective=[-1.0],
            cone_matrix=sparse.identity(1),
            cone_offset=np.zeros(1),
            cones=(ConeBlock('nonneg', 1),),
        )
        with self.assertRaises(Unbounded):
            solve(program)

    def test_semidefinite_program(self):
        """Test min <C, X> over unit-trace PSD matrices is the smallest eigenvalue"""
        c = np.array([[2.0, 1.0], [1.0, 3.0]])
        program = ConicProgram(
            objective=[c[0, 0], np.sqrt(2) * c[0, 1], c[1, 1]],
            cone_matrix=sparse.identity(3),
            cone_offset=np.zeros(3),
            cones=(ConeBlock('psd', 2),),
            eq_matrix=sparse.csr_matrix([[1.0, 0.0, 1.0]]),
            eq_rhs=[1.0],
        )
        self.assertAlmostEqual(solve(program).objective, np.linalg.eigvalsh(c)[0], places=5)

    def test_relative_entropy_block(self):
        """Test a relent block bounds t below by ν log(ν / c)"""
        program = ConicProgram(
            objective=[0.0, 0.0, 1.0],
            cone_matrix=sparse.identity(3),
            cone_offset=np.zeros(3),
            cones=(ConeBlock('relent', 1),),
            eq_matrix=sparse.csr_matrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
            eq_rhs=[1.0, 2.0],
        )
        self.assertAlmostEqual(solve(program).objective, -np.log(2.0), places=5)

    def test_lowering_appends_auxiliary_variables(self):
        """Test relent blocks lower to exponential cones plus one aggregation row"""
        program = ConicProgram(
            objective=np.zeros(5),
            cone_matrix=sparse.identity(5),
            cone_offset=np.zeros(5),
            cones=(ConeBlock('relent', 2),),
        )
        lowered = lower_relative_entropy(program)
        self.assertEqual(lowered.num_variables, 7)
        self.assertEqual([block.kind for block in lowered.cones], [ConeKind.EXP, ConeKind.NONNEG])

    def test_dump_and_load(self):
        """Test a dumped program loads back and solves to the same value"""
        text = dump_program(self.lp)
        self.assertTrue(text.startswith('# freesets conic program v1'))
        self.assertAlmostEqual(solve(load_program(text)).objective, 1.0, places=6)

    def test_shape_mismatch(self):
        """Test inconsistent cone data raises ValueError"""
        with self.assertRaises(ValueError):
            ConicProgram(
                objective=[1.0, 1.0],
                cone_matrix=sparse.identity(3),
                cone_offset=np.zeros(3),
                cones=(ConeBlock('nonneg', 2),),
            )
