import io
import json
import tempfile
from pathlib import Path

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings
from scipy import sparse

from freesets.descriptions import gauge
from freesets.equivariant import invariant_basis
from freesets.exceptions import ConfigError
from freesets.fileformats import (
    apply_tolerances,
    description_from_json,
    description_to_json,
    flatten_detail,
    parse_config,
    parse_dataset,
    program_to_json,
    read_description,
    read_program,
    write_description,
    write_triplets,
)
from freesets.fixtures import bad_cube, cube
from freesets.groups import GroupFamily
from freesets.sequences import parse_sequence
from freesets.symmetry_reduction import InvariantREProgram, InvariantSDP, SageInstance


class ConfigTest(SimpleTestCase):
    def test_parse_config(self):
        """Test a config resolves sequences, levels and defaults"""
        config = parse_config(
            '# dimension counts\n'
            'family = sym\n'
            'v = vec\n'
            'u = symmat  # matrices\n'
            '\n'
            'levels = 2..4\n'
            'cone = nonneg(n)\n'
        )
        self.assertEqual(config['v'].expression(), 'vec(sym)')
        self.assertEqual(config['u'].expression(), 'symmat(sym)')
        self.assertEqual(config['levels'], [2, 3, 4])
        self.assertEqual(str(config['cone']), 'nonneg(n)')
        self.assertEqual(config['constraint'], 'equivariant')
        self.assertEqual(config['seed'], 0)

    def test_missing_separator(self):
        """Test lines without '=' report their line number"""
        with self.assertRaisesMessage(ConfigError, 'config line 2: expected key = value'):
            parse_config('v = vec(sym)\nlevels 2..4\n')

    def test_duplicate_key(self):
        """Test a key set twice is rejected"""
        with self.assertRaisesMessage(ConfigError, 'already set on line 1'):
            parse_config('n0 = 2\nn0 = 3\n')

    def test_unknown_key(self):
        """Test unknown keys are rejected with their line"""
        with self.assertRaisesMessage(ConfigError, 'line 3: colour'):
            parse_config('v = vec(sym)\nn0 = 2\ncolour = red\n')

    def test_bad_sequence(self):
        """Test a malformed sequence is reported on its line"""
        with self.assertRaisesMessage(ConfigError, 'line 2: v'):
            parse_config('n0 = 2\nv = vec(\n')

    def test_fixed_mode_needs_offset(self):
        """Test u_mode = fixed requires u_fixed"""
        with self.assertRaisesMessage(ConfigError, 'u_fixed'):
            parse_config('u_mode = fixed\n')

    def test_fixed_offset_vector(self):
        """Test u_fixed is read as a vector"""
        config = parse_config('u_mode = fixed\nu_fixed = 1, 1 0\n')
        np.testing.assert_allclose(config['u_fixed'], [1.0, 1.0, 0.0])

    def test_bad_levels(self):
        """Test nonpositive or unreadable levels are rejected"""
        with self.assertRaises(ConfigError):
            parse_config('levels = 0..3\n')
        with self.assertRaises(ConfigError):
            parse_config('levels = two\n')

    @override_settings(FREESETS={})
    def test_tolerances_clear_cached_bases(self):
        """Test applying tolerance overrides drops cached bases"""
        invariant_basis(parse_sequence('vec(sym)'), 3)
        self.assertGreater(invariant_basis.cache_info().currsize, 0)
        overrides = apply_tolerances({'rank_tolerance': 1e-6, 'seed': 0})
        self.assertEqual(overrides, {'RANK_TOLERANCE': 1e-6})
        self.assertEqual(settings.FREESETS['RANK_TOLERANCE'], 1e-6)
        self.assertEqual(invariant_basis.cache_info().currsize, 0)

    @override_settings(FREESETS={})
    def test_no_overrides_keep_cached_bases(self):
        """Test a config without tolerances leaves cached bases alone"""
        invariant_basis(parse_sequence('vec(sym)'), 3)
        self.assertEqual(apply_tolerances({'seed': 0}), {})
        self.assertGreater(invariant_basis.cache_info().currsize, 0)

    def test_flatten_detail_keeps_field_names(self):
        """Test nested error details flatten to one line with their fields"""
        detail = {'levels': ['must be positive'], 'cone': {'kind': ['unknown']}}
        self.assertEqual(
            flatten_detail(detail), 'levels: must be positive; cone: kind: unknown'
        )


class DatasetTest(SimpleTestCase):
    def test_parse_dataset(self):
        """Test whitespace and comma separated records"""
        data = parse_dataset('2 3 4 5\n# comment\n3, 1, 2, 2, 3\n')
        self.assertEqual(data.levels, [2, 3])
        np.testing.assert_allclose(data.points[1], [1.0, 2.0, 2.0])
        np.testing.assert_allclose(data.targets, [5.0, 3.0])

    def test_point_length_checked(self):
        """Test points must match dim V_n when a sequence is given"""
        with self.assertRaisesMessage(ConfigError, 'dataset line 1'):
            parse_dataset('2 1 2 3 4\n', parse_sequence('vec(sym)'))

    def test_bad_records(self):
        """Test short and unreadable records are rejected"""
        with self.assertRaisesMessage(ConfigError, 'line 2'):
            parse_dataset('2 1 1 1\n2\n')
        with self.assertRaisesMessage(ConfigError, 'line 1'):
            parse_dataset('2 a b 1\n')
        with self.assertRaises(ConfigError):
            parse_dataset('0 1 1\n')


class DescriptionFileTest(SimpleTestCase):
    def test_json_document(self):
        """Test a description file keeps the data needed to rebuild the set"""
        text = description_to_json(cube())
        payload = json.loads(text)
        self.assertEqual(payload['format'], 'freesets-description')
        self.assertEqual(payload['v'], 'vec(bsym)')
        loaded = description_from_json(text)
        self.assertEqual(loaded.name, 'cube')
        self.assertEqual(loaded.flags.names(), cube().flags.names())
        self.assertAlmostEqual(gauge(loaded, 3, [0.2, -0.6, 0.1]), 0.6, places=5)

    def test_description_file(self):
        """Test writing and reading a description through a file"""
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'bad_cube.json'
            write_description(bad_cube(), path)
            loaded = read_description(path)
        self.assertAlmostEqual(gauge(loaded, 3, [1.0, 0.0, 0.0]), 5.0 / 3.0, places=5)

    def test_invalid_documents(self):
        """Test malformed JSON, unknown keys and wrong shapes are rejected"""
        with self.assertRaisesMessage(ConfigError, 'line 1'):
            description_from_json('{"format": ')
        payload = json.loads(description_to_json(cube()))
        with self.assertRaises(ConfigError):
            description_from_json(json.dumps({**payload, 'colour': 'red'}))
        with self.assertRaises(ConfigError):
            description_from_json(json.dumps({**payload, 'version': 2}))
        bad_shape = {**payload, 'a0': {'shape': [1, 1], 'entries': []}}
        with self.assertRaisesMessage(ConfigError, 'a0'):
            description_from_json(json.dumps(bad_shape))

    def test_missing_file(self):
        """Test unreadable files raise ConfigError"""
        with self.assertRaisesMessage(ConfigError, 'cannot read description'):
            read_description('/nonexistent/description.json')


class ProgramFileTest(SimpleTestCase):
    def setUp(self):
        """Set up test data"""
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def write(self, name, payload):
        path = Path(self.directory.name) / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
        return path

    def test_read_sdp(self):
        """Test SDP files store upper triangles of symmetric matrices"""
        path = self.write('maxcut.json', {
            'format': 'freesets-sdp',
            'version': 1,
            'sequence': 'vec(sym)',
            'level': 3,
            'sense': 'max',
            'objective': [[0, 1, 1.0], [0, 2, 1.0], [1, 2, 1.0]],
            'constraints': [{'entries': [[i, i, 1.0]], 'rhs': 1.0} for i in range(3)],
        })
        sdp = read_program(path)
        self.assertIsInstance(sdp, InvariantSDP)
        self.assertTrue(sdp.maximize)
        np.testing.assert_allclose(sdp.objective, np.ones((3, 3)) - np.eye(3))
        self.assertEqual(len(sdp.constraints), 3)
        self.assertEqual(sdp.inequalities, [])

    def test_sdp_index_out_of_range(self):
        """Test entries outside the matrix are rejected"""
        path = self.write('bad.json', {
            'format': 'freesets-sdp',
            'version': 1,
            'sequence': 'vec(sym)',
            'level': 2,
            'objective': [[0, 5, 1.0]],
        })
        with self.assertRaisesMessage(ConfigError, 'objective'):
            read_program(path)

    def test_read_relent(self):
        """Test relative entropy program files"""
        program = InvariantREProgram(
            np.eye(2), GroupFamily.SYM, 2, np.array([[1.0, 1.0, 0.0, 0.0]]), np.array([1.0])
        )
        loaded = read_program(self.write('relent.json', program_to_json(program)))
        self.assertIsInstance(loaded, InvariantREProgram)
        self.assertIs(loaded.family, GroupFamily.SYM)
        np.testing.assert_allclose(loaded.eq_matrix, program.eq_matrix)

    def test_relent_row_length(self):
        """Test constraint rows must act on (ν, c)"""
        path = self.write('relent.json', {
            'format': 'freesets-relent',
            'version': 1,
            'family': 'sym',
            'level': 2,
            'points': [[1, 0], [0, 1]],
            'eq_matrix': [[1, 1]],
            'eq_rhs': [1],
        })
        with self.assertRaisesMessage(ConfigError, 'eq_matrix'):
            read_program(path)

    def test_read_sage(self):
        """Test SAGE files with an empty B"""
        path = self.write('sage.json', {
            'format': 'freesets-sage',
            'version': 1,
            'family': 'sym',
            'level': 2,
            'a_points': [[2, 0], [0, 2]],
            'a_coefficients': [1, 1],
        })
        instance = read_program(path)
        self.assertIsInstance(instance, SageInstance)
        self.assertEqual(instance.b_points.shape, (0, 2))

    def test_sage_coefficient_count(self):
        """Test one coefficient per support point"""
        path = self.write('sage.json', {
            'format': 'freesets-sage',
            'version': 1,
            'family': 'sym',
            'level': 2,
            'a_points': [[2, 0], [0, 2]],
            'a_coefficients': [1],
        })
        with self.assertRaisesMessage(ConfigError, 'a_coefficients'):
            read_program(path)

    def test_unknown_format(self):
        """Test the format key selects the program kind"""
        with self.assertRaisesMessage(ConfigError, 'format must be one of'):
            read_program(self.write('other.json', {'format': 'lp'}))
        with self.assertRaises(ConfigError):
            read_program(self.write('broken.json', '{'))


class TripletTest(SimpleTestCase):
    def test_write_triplets(self):
        """Test triplets are written row-major after a header"""
        stream = io.StringIO()
        write_triplets(sparse.csr_matrix([[0.0, 2.0], [3.0, 0.0]]), stream, 'A_2')
        self.assertEqual(stream.getvalue(), '# A_2\n2 2 2\n0 1 2.0\n1 0 3.0\n')
