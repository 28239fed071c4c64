from dataclasses import replace

import numpy as np
import pytest
from django.test import SimpleTestCase

from freesets.descriptions import (
    DescriptionFlags,
    UExtension,
    Verdict,
    certify_compatibility,
    gauge,
    gauge_dual,
    instantiate_description,
    membership,
    sample_points,
    solve_gauge,
    support_function,
    support_point,
)
from freesets.exceptions import InvalidDescription, InvalidLevel
from freesets.fixtures import (
    ALL_MORPHISMS,
    bad_cube,
    build,
    cube,
    elliptope,
    l1_ball,
    l2_ball,
    simplex,
    spectraplex,
)
from freesets.sequences import embedding, projection


def off_diagonal_ones(n):
    """J - I in the entry coordinates of symmat."""
    rows, cols = np.triu_indices(n)
    return np.where(rows == cols, 0.0, 1.0)


class FlagsTest(SimpleTestCase):
    def test_names_round_trip(self):
        """Test flags convert to and from their names"""
        flags = DescriptionFlags.from_names(['a_morphism', 'u_identity'])
        self.assertTrue(flags.a_morphism)
        self.assertIs(flags.u_extension, UExtension.IDENTITY)
        self.assertEqual(flags.names(), ['a_morphism', 'u_identity'])

    def test_unknown_flag(self):
        """Test unknown flag names raise InvalidDescription"""
        with self.assertRaises(InvalidDescription):
            DescriptionFlags.from_names(['c_morphism'])


class ValidationTest(SimpleTestCase):
    def test_wrong_offset_length(self):
        """Test u0 must match dim U at n0"""
        with self.assertRaises(InvalidDescription):
            build('bad', 'vec(sym)', 'fixed(0)', 'vec(sym)', 'nonneg(n)',
                  np.eye(2), None, [1.0, 1.0, 1.0], 2)

    def test_cone_rows_must_match(self):
        """Test the cone must have dim U rows at n0"""
        with self.assertRaises(InvalidDescription):
            build('bad', 'vec(sym)', 'fixed(0)', 'vec(sym)', 'nonneg(n+1)',
                  np.eye(2), None, [1.0, 1.0], 2)

    def test_non_equivariant_operator(self):
        """Test a non-equivariant A0 is rejected"""
        with self.assertRaises(InvalidDescription):
            build('bad', 'vec(sym)', 'fixed(0)', 'vec(sym)', 'nonneg(n)',
                  np.diag([1.0, 2.0]), None, [1.0, 1.0], 2)

    def test_non_invariant_offset(self):
        """Test a non-invariant u0 is rejected"""
        with self.assertRaises(InvalidDescription):
            build('bad', 'vec(sym)', 'fixed(0)', 'vec(sym)', 'nonneg(n)',
                  np.eye(2), None, [1.0, 2.0], 2)

    def test_false_morphism_flag(self):
        """Test claiming B is a morphism fails when it is not"""
        with self.assertRaises(InvalidDescription):
            replace(bad_cube(), flags=ALL_MORPHISMS)

    def test_negative_regularization(self):
        """Test λ must be nonnegative"""
        with self.assertRaises(InvalidDescription):
            cube().with_regularization(-1.0)


class InstantiationTest(SimpleTestCase):
    def test_stored_level(self):
        """Test the stored level reproduces the stored data"""
        description = cube()
        instance = instantiate_description(description, 2)
        np.testing.assert_allclose(instance.a.toarray(), description.a0.toarray())
        np.testing.assert_allclose(instance.u, description.u0)

    def test_simplex_extension(self):
        """Test the simplex extends to (I; 1^T) with offset (0, -1)"""
        instance = instantiate_description(simplex(), 4)
        expected = np.vstack([np.eye(4), np.ones((1, 4))])
        np.testing.assert_allclose(instance.a.toarray(), expected, atol=1e-8)
        np.testing.assert_allclose(instance.u, [0.0, 0.0, 0.0, 0.0, -1.0], atol=1e-8)

    def test_elliptope_extension(self):
        """Test the elliptope extends to X -> (X, diag X) with offset (0, -1)"""
        instance = instantiate_description(elliptope(), 5)
        dim = 15
        self.assertEqual(instance.a.shape, (dim + 5, dim))
        np.testing.assert_allclose(instance.a.toarray()[:dim], np.eye(dim), atol=1e-8)
        np.testing.assert_allclose(instance.u[dim:], -np.ones(5), atol=1e-8)
        np.testing.assert_allclose(instance.u[:dim], 0.0, atol=1e-8)

    def test_instances_are_cached(self):
        """Test repeated instantiation returns the cached instance"""
        description = simplex()
        self.assertIs(instantiate_description(description, 3),
                      instantiate_description(description, 3))


class GaugeTest(SimpleTestCase):
    def test_bad_cube_gauge(self):
        """Test the bad cube extends to 3/(2n-1) [-1, 1]^n"""
        x = np.array([1.0, 0.0, 0.0])
        self.assertAlmostEqual(gauge(bad_cube(), 3, x), 5.0 / 3.0, places=5)
        self.assertAlmostEqual(gauge(bad_cube(), 2, [1.0, 0.0]), 1.0, places=5)

    def test_cube_gauge(self):
        """Test the cube gauge is the max norm"""
        self.assertAlmostEqual(gauge(cube(), 2, [0.5, -0.25]), 0.5, places=5)
        self.assertAlmostEqual(gauge(cube(), 4, [0.1, -0.7, 0.3, 0.0]), 0.7, places=5)

    def test_l1_gauge(self):
        """Test the cross-polytope gauge is the ℓ1 norm"""
        self.assertAlmostEqual(gauge(l1_ball(), 2, [1.0, 1.0]), 2.0, places=5)
        self.assertAlmostEqual(gauge(l1_ball(), 3, [1.0, -1.0, 0.5]), 2.5, places=5)

    def test_l2_gauge(self):
        """Test the Euclidean ball gauge is the ℓ2 norm"""
        self.assertAlmostEqual(gauge(l2_ball(), 2, [3.0, 4.0]), 5.0, places=4)
        self.assertAlmostEqual(gauge(l2_ball(), 3, [1.0, 2.0, 2.0]), 3.0, places=4)

    def test_dual_matches_primal(self):
        """Test the dual gauge program attains the primal value"""
        x = [0.5, -0.25]
        self.assertAlmostEqual(gauge_dual(cube(), 2, x), gauge(cube(), 2, x), places=5)

    def test_regularization_increases_gauge(self):
        """Test a positive λ never lowers the gauge"""
        plain = gauge(cube(), 2, [0.5, -0.25])
        regularized = gauge(cube(), 2, [0.5, -0.25], lam=0.1)
        self.assertGreaterEqual(regularized, plain - 1e-6)

    def test_witness(self):
        """Test the gauge witness t matches the value when λ is zero"""
        result = solve_gauge(cube(), 2, [0.5, -0.25])
        self.assertAlmostEqual(result.t, result.value, places=5)
        self.assertEqual(len(result.y), 3)

    def test_infeasible_gauge(self):
        """Test points outside every dilate get +inf"""
        result = solve_gauge(simplex(), 2, [1.0, -1.0])
        self.assertFalse(result.feasible)
        self.assertEqual(result.value, np.inf)

    def test_wrong_length(self):
        """Test a point of the wrong level raises InvalidLevel"""
        with self.assertRaises(InvalidLevel):
            gauge(cube(), 3, [1.0, 2.0])


class SupportTest(SimpleTestCase):
    def test_elliptope_support(self):
        """Test the max-cut objective over the elliptope"""
        description = elliptope()
        self.assertAlmostEqual(support_function(description, 3, off_diagonal_ones(3)), 6.0,
                               places=4)
        self.assertAlmostEqual(support_function(description, 4, off_diagonal_ones(4)), 12.0,
                               places=4)

    def test_spectraplex_support(self):
        """Test the spectraplex support is the top eigenvalue"""
        c = np.zeros(10)
        rows, cols = np.triu_indices(4)
        diagonal = np.flatnonzero(rows == cols)
        c[diagonal] = [3.0, 1.0, 1.0, 1.0]
        self.assertAlmostEqual(support_function(spectraplex(), 4, c), 3.0, places=4)

    def test_simplex_support(self):
        """Test the simplex support is the largest coordinate"""
        value, point = support_point(simplex(), 4, [1.0, 2.0, 3.0, 4.0])
        self.assertAlmostEqual(value, 4.0, places=5)
        np.testing.assert_allclose(point, [0.0, 0.0, 0.0, 1.0], atol=1e-5)

    def test_cube_is_polar_to_cross_polytope(self):
        """Test the cube gauge equals the ℓ1-ball support function"""
        rng = np.random.default_rng(11)
        for _ in range(5):
            x = rng.standard_normal(3)
            self.assertAlmostEqual(gauge(cube(), 3, x), support_function(l1_ball(), 3, x),
                                   places=5)


class MembershipTest(SimpleTestCase):
    def test_ball_membership(self):
        """Test membership in the Euclidean ball"""
        self.assertTrue(membership(l2_ball(), 2, [0.3, 0.4]))
        self.assertFalse(membership(l2_ball(), 2, [0.8, 0.8]))

    def test_cube_membership_at_higher_level(self):
        """Test membership after extending the cube"""
        self.assertTrue(membership(cube(), 4, [0.9, -0.9, 0.0, 0.5]))
        self.assertFalse(membership(cube(), 4, [0.9, -1.2, 0.0, 0.5]))

    def test_sample_points_lie_in_simplex(self):
        """Test sampled points are convex combinations of support points"""
        points = sample_points(simplex(), 3, 6, seed=2)
        self.assertEqual(points.shape, (6, 3))
        np.testing.assert_allclose(points.sum(axis=1), np.ones(6), atol=1e-5)
        self.assertGreaterEqual(points.min(), -1e-5)


class CompatibilityTest(SimpleTestCase):
    def test_cube_certified(self):
        """Test the cube certifies both intersection and projection compatibility"""
        report = certify_compatibility(cube())
        certified = (Verdict.CERTIFIED, Verdict.CERTIFIED_UP_TO)
        self.assertIn(report.intersection, certified)
        self.assertIn(report.projection, certified)
        self.assertTrue(all(check.passed for check in report.hypotheses.values()))
        self.assertEqual(len(report.levels), 2)

    def test_bad_cube_fails(self):
        """Test the bad cube fails certification"""
        report = certify_compatibility(bad_cube())
        self.assertIs(report.intersection, Verdict.FAILED)
        self.assertIs(report.projection, Verdict.FAILED)
        self.assertFalse(report.hypothesis('b_morphism').passed)

    def test_elliptope_projection_case_b(self):
        """Test the elliptope is projection compatible through case (b) only"""
        report = certify_compatibility(elliptope(), levels_checked=1)
        self.assertIs(report.intersection, Verdict.FAILED)
        self.assertIn(report.projection, (Verdict.CERTIFIED, Verdict.CERTIFIED_UP_TO))
        self.assertEqual(report.projection_case, 'b')

    def test_report_serializes(self):
        """Test the report renders as a dict and as text lines"""
        report = certify_compatibility(cube(), levels_checked=1)
        data = report.as_dict()
        self.assertIn(data['intersection'], ('certified', 'certified_up_to'))
        self.assertEqual(data['checked_through'], 3)
        self.assertTrue(any(line.startswith('projection:') for line in report.lines()))

    def test_levels_checked_must_be_positive(self):
        """Test levels_checked below one raises ValueError"""
        with self.assertRaises(ValueError):
            certify_compatibility(cube(), levels_checked=0)


class GaugeDualityTest(SimpleTestCase):
    def setUp(self):
        """Set up test data"""
        self.descriptions = [cube(), l1_ball(), l2_ball(), bad_cube()]
        self.rng = np.random.default_rng(21)

    def test_gauge_matches_dual_on_random_pairs(self):
        """Test primal and dual gauges agree on 50 random descriptions and points"""
        for _ in range(50):
            description = self.descriptions[self.rng.integers(len(self.descriptions))]
            n = int(self.rng.integers(2, 5))
            x = self.rng.standard_normal(n)
            value = gauge(description, n, x)
            self.assertLessEqual(abs(value - gauge_dual(description, n, x)), 1e-5 * (1.0 + value))

    def test_positive_homogeneity(self):
        """Test the gauge scales linearly with positive multiples of the point"""
        for description in (cube().with_regularization(0.1), l1_ball(), l2_ball()):
            for _ in range(5):
                x = self.rng.standard_normal(3)
                scale = self.rng.uniform(0.1, 10.0)
                expected = scale * gauge(description, 3, x)
                self.assertAlmostEqual(
                    gauge(description, 3, scale * x), expected, delta=1e-6 * max(1.0, expected)
                )


class SampledCompatibilityTest(SimpleTestCase):
    def assert_sampled_inclusions(self, description, count=200):
        """
        Check the inclusions each certified verdict promises on ``count``
        sampled points per level, for levels n0..n0+2. Returns how many
        (level, verdict) pairs were checked.
        """
        report = certify_compatibility(description)
        certified = (Verdict.CERTIFIED, Verdict.CERTIFIED_UP_TO)
        seq_v = description.seq_v
        checked = 0
        for n in range(description.n0, description.n0 + 3):
            up = embedding(seq_v, n, n + 1).matrix
            down = projection(seq_v, n + 1, n).matrix
            if report.intersection in certified:
                for x in sample_points(description, n, count, seed=n):
                    self.assertTrue(membership(description, n + 1, up @ x, tol=1e-6))
                for x in sample_points(description, n + 1, count, seed=n, within_level=n):
                    self.assertTrue(membership(description, n, x, tol=1e-6))
                checked += 1
            if report.projection in certified:
                for x in sample_points(description, n + 1, count, seed=n + 1):
                    self.assertTrue(membership(description, n, down @ x, tol=1e-6))
                checked += 1
        return checked

    @pytest.mark.slow
    def test_cube_inclusions(self):
        """Test sampled cube points respect both certified inclusions"""
        self.assertEqual(self.assert_sampled_inclusions(cube()), 6)

    @pytest.mark.slow
    def test_elliptope_projections(self):
        """Test projections of sampled elliptope points stay in the elliptope"""
        self.assertEqual(self.assert_sampled_inclusions(elliptope()), 3)

    @pytest.mark.slow
    def test_other_certified_fixtures(self):
        """Test every certified inclusion of the remaining fixtures on sampled points"""
        for description in (simplex(), l1_ball(), l2_ball()):
            self.assert_sampled_inclusions(description)
