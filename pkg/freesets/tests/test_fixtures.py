import numpy as np
from django.test import SimpleTestCase

from freesets.descriptions import UExtension, gauge, morphism_residuals, support_function
from freesets.exceptions import InvalidDescription
from freesets.fixtures import (
    FIXTURES,
    free_spectrahedron,
    get_fixture,
    inverse_stability,
    permutahedron,
    simplex,
    spectral_norm_ball,
)


class FixtureLibraryTest(SimpleTestCase):
    def test_every_fixture_builds(self):
        """Test every named fixture constructs and carries its name"""
        for name in FIXTURES:
            description = get_fixture(name)
            self.assertEqual(description.name, name)

    def test_unknown_fixture(self):
        """Test unknown fixture names raise InvalidDescription"""
        with self.assertRaises(InvalidDescription) as caught:
            get_fixture('dodecahedron')
        self.assertIn('simplex', str(caught.exception))

    def test_flags_match_residuals(self):
        """Test every flag a fixture claims is backed by a small morphism residual"""
        for name in FIXTURES:
            description = get_fixture(name)
            residuals = morphism_residuals(description)
            for flag in description.flags.names():
                if flag in residuals:
                    self.assertLess(residuals[flag], 1e-6, f'{name} {flag}')

    def test_simplex_adjoint_is_not_a_morphism(self):
        """Test the simplex claims A but not A* as a morphism"""
        description = simplex()
        residuals = morphism_residuals(description)
        self.assertLess(residuals['a_morphism'], 1e-8)
        self.assertGreater(residuals['a_adjoint'], 0.5)
        self.assertTrue(description.flags.a_morphism)
        self.assertFalse(description.flags.a_adjoint)


class MatrixFixtureTest(SimpleTestCase):
    def setUp(self):
        """Set up test data"""
        rows, cols = np.triu_indices(4)
        self.diagonal = np.flatnonzero(rows == cols)
        self.entries = len(rows)

    def test_inverse_stability_total(self):
        """Test the total-sum constraint of the inverse-stability set"""
        c = np.ones(self.entries)
        self.assertAlmostEqual(support_function(inverse_stability(), 4, c), 1.0, places=5)

    def test_spectral_norm_ball(self):
        """Test the spectral norm ball as a monic free spectrahedron"""
        description = spectral_norm_ball()
        self.assertIs(description.flags.u_extension, UExtension.IDENTITY)
        c = np.zeros(self.entries)
        c[self.diagonal[0]] = 1.0
        self.assertAlmostEqual(support_function(description, 4, c), 1.0, places=4)

    def test_spectral_norm_gauge(self):
        """Test the spectral norm ball gauge is the operator norm"""
        x = np.zeros(self.entries)
        x[self.diagonal] = [2.0, -0.5, 0.0, 1.0]
        self.assertAlmostEqual(gauge(spectral_norm_ball(), 4, x), 2.0, places=4)

    def test_free_spectrahedron_rejects_bad_pencils(self):
        """Test pencils must be nonempty, symmetric and of equal size"""
        with self.assertRaises(InvalidDescription):
            free_spectrahedron([])
        with self.assertRaises(InvalidDescription):
            free_spectrahedron([np.array([[0.0, 1.0], [0.0, 0.0]])])
        with self.assertRaises(InvalidDescription):
            free_spectrahedron([np.eye(2), np.eye(3)])


class PermutahedronTest(SimpleTestCase):
    def test_permutahedron_support(self):
        """Test the permutahedron support picks the largest spectrum value"""
        description = permutahedron([1.0, 0.0], [1, 1], n0=1)
        c = np.zeros(4)
        c[0] = 4.0
        self.assertAlmostEqual(support_function(description, 1, c), 1.0, places=4)

    def test_permutahedron_sum(self):
        """Test every point of the permutahedron has the spectrum's mean"""
        description = permutahedron([2.0, 0.0], [1, 1], n0=1)
        self.assertAlmostEqual(support_function(description, 1, np.ones(4)), 1.0, places=4)

    def test_spectrum_validation(self):
        """Test values and multiplicities must be nonempty and aligned"""
        with self.assertRaises(InvalidDescription):
            permutahedron([1.0, 0.0], [1])
        with self.assertRaises(InvalidDescription):
            permutahedron([1.0], [0])
