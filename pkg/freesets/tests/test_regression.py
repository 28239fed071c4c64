from unittest import mock

import numpy as np
import pytest
from django.test import SimpleTestCase, override_settings

from freesets.descriptions import gauge
from freesets.equivariant import ConstraintClass
from freesets.exceptions import (
    AllRestartsFailed,
    EmptyBasis,
    InvalidLevel,
    InvalidTarget,
    SolverError,
)
from freesets.fixtures import cube
from freesets.regression import (
    CostNorm,
    Dataset,
    RegressionProblem,
    UMode,
    _Fitter,
    entropy_variant,
    evaluate_fit,
    fit,
    lp_norm,
    normalize_data,
    sample_cube_boundary,
    sample_psd_data,
    sample_unit_lp_data,
)
from freesets.sequences import parse_sequence
from freesets.solver import ConeSpec


def ball_problem(data, **options):
    """Fit problem for the Euclidean ball as a 2x2-block LMI."""
    return RegressionProblem(
        seq_v=parse_sequence('vec(bsym)'),
        seq_w=parse_sequence('fixed(0)'),
        seq_u=parse_sequence('moment(1, vec(bsym))'),
        cone=ConeSpec.parse('psd(n+1)'),
        n0=2,
        data=data,
        **options,
    )


class DatasetTest(SimpleTestCase):
    def test_by_level(self):
        """Test records group by level in sorted order"""
        data = Dataset([3, 2, 3], [np.ones(3), np.ones(2), np.zeros(3)], [1.0, 2.0, 3.0])
        self.assertEqual(data.by_level(), {2: [1], 3: [0, 2]})
        self.assertEqual(len(data), 3)

    def test_lengths_must_match(self):
        """Test mismatched record fields raise ValueError"""
        with self.assertRaises(ValueError):
            Dataset([2], [np.ones(2), np.ones(2)], [1.0])


class ProblemTest(SimpleTestCase):
    def setUp(self):
        """Set up test data"""
        self.data = Dataset([2], [np.array([3.0, 4.0])], [5.0])

    @override_settings(FREESETS={'RESTARTS': 7, 'LAMBDA_MIN': 0.01})
    def test_defaults_from_settings(self):
        """Test unset options fall back to the FREESETS settings"""
        problem = ball_problem(self.data)
        self.assertEqual(problem.restarts, 7)
        self.assertEqual(problem.lambda_min, 0.01)
        self.assertEqual(problem.max_alternations, 50)

    def test_invalid_options(self):
        """Test invalid option combinations raise ValueError"""
        with self.assertRaises(ValueError):
            ball_problem(self.data, constraint=ConstraintClass.INVARIANT)
        with self.assertRaises(ValueError):
            ball_problem(self.data, u_mode=UMode.FIXED)
        with self.assertRaises(ValueError):
            ball_problem(self.data, lambda_min=0.1, lam=0.01)
        with self.assertRaises(ValueError):
            ball_problem(self.data, restarts=0)

    def test_normalize_data(self):
        """Test points are embedded into V_n0 and scaled to unit targets"""
        data = Dataset([1, 2], [np.array([2.0]), np.array([3.0, 4.0])], [2.0, 5.0])
        problem = normalize_data(ball_problem(data))
        self.assertTrue(problem.normalized)
        np.testing.assert_allclose(problem.data.points[0], [1.0, 0.0])
        np.testing.assert_allclose(problem.data.points[1], [0.6, 0.8])
        np.testing.assert_allclose(problem.data.targets, [1.0, 1.0])
        np.testing.assert_allclose(problem.scales, [2.0, 5.0])

    def test_normalize_rejects_bad_data(self):
        """Test nonpositive targets and levels above n0 are rejected"""
        with self.assertRaises(InvalidTarget):
            normalize_data(ball_problem(Dataset([2], [np.ones(2)], [0.0])))
        with self.assertRaises(InvalidLevel):
            normalize_data(ball_problem(Dataset([3], [np.ones(3)], [1.0])))


class FitTest(SimpleTestCase):
    def setUp(self):
        """Set up test data"""
        self.data = sample_unit_lp_data([2], 6, p=2, seed=4)

    def test_fit_euclidean_ball(self):
        """Test the fit recovers the Euclidean ball from its gauge values"""
        result = fit(ball_problem(self.data, restarts=1, max_alternations=3))
        self.assertLess(result.objective, 1e-5)
        self.assertEqual(result.restart, 0)
        self.assertAlmostEqual(gauge(result.description, 2, [3.0, 4.0]), 5.0, places=3)
        self.assertAlmostEqual(gauge(result.description, 3, [1.0, 2.0, 2.0]), 3.0, places=3)

    def test_fit_metrics(self):
        """Test the metrics sidecar carries the trace and tolerances"""
        result = fit(ball_problem(self.data, restarts=1, max_alternations=2))
        metrics = result.metrics()
        self.assertEqual(metrics['restart'], 0)
        self.assertEqual(len(metrics['residuals']), 6)
        self.assertEqual(metrics['failed_restarts'], 0)
        self.assertIn('MEMBERSHIP_TOLERANCE', metrics['tolerances'])

    def test_parallel_restarts_agree(self):
        """Test restarts run on a thread pool pick the same best restart"""
        serial = fit(ball_problem(self.data, restarts=3, max_alternations=2))
        parallel = fit(ball_problem(self.data, restarts=3, max_alternations=2, jobs=2))
        self.assertEqual(serial.restart, parallel.restart)
        self.assertAlmostEqual(serial.objective, parallel.objective, places=6)

    def test_trace_is_monotone(self):
        """Test the alternation objective never increases"""
        result = fit(ball_problem(self.data, restarts=1, max_alternations=4,
                                  norm=CostNorm.L1))
        for before, after in zip(result.trace, result.trace[1:]):
            self.assertLessEqual(after, before + 1e-6)

    def test_fit_from_exact_cube(self):
        """Test starting from the exact cube description gives a zero residual"""
        start = cube()
        problem = RegressionProblem(
            seq_v=start.seq_v,
            seq_w=start.seq_w,
            seq_u=start.seq_u,
            cone=start.cone,
            n0=2,
            data=sample_cube_boundary(2, 8, seed=1),
            u_mode=UMode.FIXED,
            u_fixed=start.u0,
            lambda_min=0.0,
            lam=0.0,
            restarts=1,
            max_alternations=2,
            initial=start,
        )
        result = fit(problem)
        self.assertLess(result.objective, 1e-6)

    def test_evaluate_fit(self):
        """Test per-level relative errors of an exact description vanish"""
        data = sample_cube_boundary(3, 4, seed=2)
        table = evaluate_fit(cube(), data)
        self.assertEqual(len(table), 1)
        self.assertEqual(table[0].level, 3)
        self.assertEqual(table[0].count, 4)
        self.assertLess(table[0].max_error, 1e-5)

    def test_evaluate_rejects_nonpositive_targets(self):
        """Test evaluation needs positive true values"""
        with self.assertRaises(InvalidTarget):
            evaluate_fit(cube(), Dataset([2], [np.ones(2)], [-1.0]))


class SamplerTest(SimpleTestCase):
    def test_lp_norm(self):
        """Test the ℓp norm helper"""
        self.assertAlmostEqual(lp_norm([3.0, -4.0], 2), 5.0)
        self.assertAlmostEqual(lp_norm([1.0, 1.0], 1), 2.0)

    def test_entropy_variant(self):
        """Test the trace entropy variant on simple spectra"""
        self.assertEqual(entropy_variant(np.zeros((2, 2))), 0.0)
        # X = I_2: Tr X = 2, eigenvalues 1, each term (1 + 2) log(1/2 + 1)
        self.assertAlmostEqual(entropy_variant(np.eye(2)), 6.0 * np.log(1.5))

    def test_unit_lp_data(self):
        """Test unit-norm samples carry their ℓp norms"""
        data = sample_unit_lp_data([2, 3], 4, p=np.pi, seed=0)
        self.assertEqual(len(data), 8)
        for x, y in zip(data.points, data.targets):
            self.assertAlmostEqual(np.linalg.norm(x), 1.0)
            self.assertAlmostEqual(lp_norm(x), y)

    def test_psd_data(self):
        """Test Wishart samples come in symmetric-entry coordinates"""
        data = sample_psd_data([3], 2, seed=0)
        self.assertEqual(len(data.points[0]), 6)
        self.assertTrue(np.all(data.targets > 0))

    def test_cube_boundary(self):
        """Test cube boundary samples have unit max norm"""
        data = sample_cube_boundary(4, 5, seed=3)
        for x in data.points:
            self.assertAlmostEqual(np.abs(x).max(), 1.0)


def failing_after(calls):
    """Stand-in for _Fitter.witnesses that fails after ``calls`` successful calls."""
    original = _Fitter.witnesses
    made = []

    def witnesses(fitter, *args):
        if len(made) >= calls:
            raise SolverError('infeasible', 'solver returned status infeasible')
        made.append(args)
        return original(fitter, *args)

    return witnesses


class FailureTest(SimpleTestCase):
    def setUp(self):
        """Set up test data"""
        self.data = sample_unit_lp_data([2], 6, p=2, seed=4)

    def test_failure_keeps_last_completed_step(self):
        """Test a solver failure after a completed step keeps that step"""
        with mock.patch.object(_Fitter, 'witnesses', failing_after(1)):
            result = fit(ball_problem(self.data, restarts=1, max_alternations=4))
        self.assertEqual(len(result.trace), 1)
        self.assertEqual(result.failed_restarts, 0)
        self.assertEqual(result.restart, 0)

    def test_failure_before_any_step(self):
        """Test a restart failing in its first step is dropped"""
        with mock.patch.object(_Fitter, 'witnesses', failing_after(0)):
            with self.assertRaises(AllRestartsFailed):
                fit(ball_problem(self.data, restarts=2, max_alternations=4))

    def test_vanishing_maps_dropped_for_morphisms(self):
        """Test basis maps that vanish on the data are dropped in morphism fits"""
        data = Dataset([2, 2], [np.zeros(2), np.zeros(2)], [1.0, 2.0])
        for constraint in (ConstraintClass.MORPHISM, ConstraintClass.MORPHISM_WITH_ADJOINT):
            with self.assertRaises(EmptyBasis):
                fit(ball_problem(data, constraint=constraint, restarts=1))


class LearnedOffsetTest(SimpleTestCase):
    def setUp(self):
        """Set up test data"""
        self.start = cube()

    def cube_problem(self, data, **options):
        return RegressionProblem(
            seq_v=self.start.seq_v,
            seq_w=self.start.seq_w,
            seq_u=self.start.seq_u,
            cone=self.start.cone,
            n0=2,
            data=data,
            constraint=ConstraintClass.MORPHISM_WITH_ADJOINT,
            u_mode=UMode.LEARN,
            lambda_min=0.0,
            lam=0.0,
            **options,
        )

    def test_learned_offset_steps(self):
        """Test a learned u makes two coefficient solves per round"""
        problem = normalize_data(self.cube_problem(sample_cube_boundary(2, 6, seed=5)))
        fitter = _Fitter(problem)
        self.assertEqual(fitter.round_steps(), (True, False))
        self.assertEqual(fitter.u_columns.shape[1], 3)

    def test_offset_scale_is_pinned(self):
        """Test the u-free pass keeps the component of u along its current value"""
        problem = normalize_data(
            self.cube_problem(sample_cube_boundary(2, 8, seed=1), restarts=1, initial=self.start)
        )
        fitter = _Fitter(problem)
        alpha, beta, gamma, lam = fitter.initial_state(0)
        witnesses = fitter.witnesses(alpha, beta, gamma, lam)
        _, _, new_gamma, _, _, value = fitter.coefficients_step(witnesses, gamma, lam)
        self.assertLess(value, 1e-6)
        self.assertAlmostEqual(float(new_gamma @ gamma), float(gamma @ gamma), places=6)

    def test_trace_is_monotone_with_learned_offset(self):
        """Test the objective never increases across both passes of a round"""
        result = fit(self.cube_problem(sample_cube_boundary(2, 12, seed=6), restarts=1,
                                       max_alternations=3))
        for before, after in zip(result.trace, result.trace[1:]):
            self.assertLessEqual(after, before + 1e-6)

    @pytest.mark.slow
    def test_cube_recovery_from_random_starts(self):
        """Test the compatible cube family fitted to boundary data is the max norm everywhere"""
        problem = self.cube_problem(
            sample_cube_boundary(2, 50, seed=0), restarts=10, max_alternations=20
        )
        result = fit(problem)
        self.assertLess(result.objective, 1e-5)
        rng = np.random.default_rng(7)
        for n in (2, 3, 5):
            for _ in range(100):
                x = rng.standard_normal(n)
                self.assertAlmostEqual(
                    gauge(result.description, n, x), np.abs(x).max(), delta=1e-4
                )


class LpNormFitTest(SimpleTestCase):
    @pytest.mark.slow
    def test_lp_norm_fit_extends_gracefully(self):
        """Test a compatible ℓ_π fit on small inputs stays accurate when extended"""
        spaces = 'moment(1, l1lift(bsym))'
        problem = RegressionProblem(
            seq_v=parse_sequence('vec(bsym)'),
            seq_w=parse_sequence(spaces),
            seq_u=parse_sequence(spaces),
            cone=ConeSpec.parse('psd(2n+2)'),
            n0=2,
            data=sample_unit_lp_data([1, 2], 25, p=np.pi, seed=0),
            constraint=ConstraintClass.MORPHISM_WITH_ADJOINT,
            restarts=5,
            max_alternations=25,
        )
        result = fit(problem)
        for before, after in zip(result.trace, result.trace[1:]):
            self.assertLessEqual(after, before + 1e-6)

        training = evaluate_fit(result, problem.data)
        mean = sum(row.mean_error * row.count for row in training) / len(problem.data)
        self.assertLessEqual(mean, 0.05)

        table = {
            row.level: row.mean_error
            for row in evaluate_fit(result, sample_unit_lp_data([4, 20], 20, p=np.pi, seed=1))
        }
        self.assertTrue(np.isfinite(table[20]))
        self.assertLessEqual(table[20], 5.0 * max(table[4], 1e-3))
