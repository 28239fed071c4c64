import json
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase
from rest_framework.exceptions import ValidationError

from freesets.exceptions import InvalidDescription
from freesets.fileformats import read_description, write_dataset
from freesets.management.base import FreesetsCommand
from freesets.regression import sample_cube_boundary, sample_unit_lp_data


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        """Set up test data"""
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)
        self.root = Path(self.directory.name)

    def write(self, name, text):
        path = self.root / name
        path.write_text(text if isinstance(text, str) else json.dumps(text))
        return str(path)

    def write_data(self, name, dataset):
        path = self.root / name
        with path.open('w') as stream:
            write_dataset(dataset, stream)
        return str(path)

    def call(self, *args, **options):
        out = StringIO()
        call_command(*args, stdout=out, **options)
        return out.getvalue()


class DimsCommandTest(CommandTestCase):
    def test_csv_counts(self):
        """Test dimension counts for R^n under S_n"""
        config = self.write('dims.cfg', 'family = sym\nv = vec\nlevels = 2..3\n')
        output = self.call('dims', config, '--skip-morphisms', '--csv')
        lines = output.strip().splitlines()
        self.assertEqual(lines[0].split(',')[:6],
                         ['level', 'dim_v', 'dim_u', 'invariant_v', 'invariant_u', 'equivariant'])
        self.assertEqual(lines[1], '2,2,2,1,1,2,,')
        self.assertEqual(lines[2], '3,3,3,1,1,2,,')

    def test_levels_override_and_jobs(self):
        """Test --levels replaces the config levels and threads give the same table"""
        config = self.write('dims.cfg', 'v = symmat(sym)\nlevels = 2\n')
        serial = self.call('dims', config, '--levels', '4..5', '--skip-morphisms', '--csv')
        parallel = self.call('dims', config, '--levels', '4..5', '--skip-morphisms', '--csv',
                             '--jobs', '2')
        self.assertEqual(serial, parallel)
        self.assertTrue(serial.splitlines()[1].startswith('4,10,10,2,2,'))

    def test_missing_levels(self):
        """Test a config without levels is rejected"""
        config = self.write('dims.cfg', 'v = vec(sym)\n')
        with self.assertRaisesMessage(CommandError, 'levels'):
            self.call('dims', config)

    def test_bad_jobs(self):
        """Test --jobs must be positive"""
        config = self.write('dims.cfg', 'v = vec(sym)\nlevels = 2\n')
        with self.assertRaises(CommandError):
            self.call('dims', config, '--jobs', '0')

    def test_unreadable_config(self):
        """Test a missing config file becomes a CommandError"""
        with self.assertRaisesMessage(CommandError, 'cannot read config'):
            self.call('dims', str(self.root / 'missing.cfg'))


class BasisCommandTest(CommandTestCase):
    def test_invariant_basis(self):
        """Test the invariant basis of R^3 under S_3 is one column"""
        config = self.write('basis.cfg', 'v = vec(sym)\nn0 = 3\n')
        output = self.call('basis', config, '--kind', 'invariant')
        lines = output.splitlines()
        self.assertTrue(lines[0].startswith('# invariant basis of vec(sym) at level 3'))
        self.assertTrue(lines[1].startswith('3 1 '))

    def test_basis_to_file(self):
        """Test --output writes the triplets to a file"""
        config = self.write('basis.cfg', 'v = vec(sym)\n')
        target = self.root / 'basis.txt'
        output = self.call('basis', config, '--level', '4', '--output', str(target))
        self.assertIn('Wrote 2 basis vectors', output)
        self.assertTrue(target.read_text().startswith('# equivariant basis'))


class CheckCommandTest(CommandTestCase):
    def test_cube(self):
        """Test the cube is certified"""
        output = self.call('check', '--fixture', 'cube', '--levels', '1')
        self.assertIn('Intersection compatibility certified', output)
        self.assertIn('Projection compatibility certified', output)
        self.assertNotIn('❌', output)

    def test_bad_cube(self):
        """Test the bad cube fails without failing the command"""
        output = self.call('check', '--fixture', 'bad_cube', '--levels', '1')
        self.assertIn('❌ Intersection compatibility failed', output)

    def test_json_report(self):
        """Test --json prints the report as JSON"""
        report = json.loads(self.call('check', '--fixture', 'cube', '--levels', '1', '--json'))
        self.assertEqual(report['checked_through'], 3)

    def test_description_source(self):
        """Test exactly one of a file and --fixture is required"""
        with self.assertRaisesMessage(CommandError, 'is required'):
            self.call('check')
        with self.assertRaisesMessage(CommandError, 'not both'):
            self.call('check', 'cube.json', '--fixture', 'cube')
        with self.assertRaises(CommandError):
            self.call('check', '--fixture', 'dodecahedron')


class ExtendCommandTest(CommandTestCase):
    def test_extend_to_stdout(self):
        """Test the extended operators are printed as labelled triplets"""
        output = self.call('extend', '--fixture', 'simplex', '--level', '3')
        self.assertTrue(output.startswith('# level 3; cone'))
        for label in ('# A_3', '# B_3', '# u_3'):
            self.assertIn(label, output)

    def test_extend_to_directory(self):
        """Test --output writes one file per piece"""
        target = self.root / 'level4'
        output = self.call('extend', '--fixture', 'cube', '--level', '4', '--output', str(target))
        self.assertIn('to level 4', output)
        for name in ('A.txt', 'B.txt', 'u.txt'):
            self.assertTrue((target / name).exists())


class EvalCommandTest(CommandTestCase):
    def test_exact_description(self):
        """Test an exact description has vanishing relative errors"""
        data = self.write_data('cube.dat', sample_cube_boundary(3, 4, seed=2))
        output = self.call('eval', '--fixture', 'cube', '--data', data, '--csv')
        lines = output.strip().splitlines()
        self.assertEqual(lines[0], 'level,count,mean_relative_error,max_relative_error')
        level, count, mean, worst = lines[1].split(',')
        self.assertEqual((level, count), ('3', '4'))
        self.assertLess(float(worst), 1e-5)

    def test_max_level(self):
        """Test --max-level drops higher levels"""
        data = self.write('mixed.dat', '2 0.5 1.0 1.0\n3 1.0 0.0 0.0 1.0\n')
        output = self.call('eval', '--fixture', 'cube', '--data', data, '--max-level', '2',
                           '--csv')
        self.assertEqual(len(output.strip().splitlines()), 2)

    def test_wrong_point_length(self):
        """Test dataset points must match the description's V"""
        data = self.write('bad.dat', '2 1.0 1.0 1.0 1.0\n')
        with self.assertRaisesMessage(CommandError, 'line 1'):
            self.call('eval', '--fixture', 'cube', '--data', data)


class FitCommandTest(CommandTestCase):
    def test_fit_ball(self):
        """Test fitting writes a description and its metrics sidecar"""
        data = self.write_data('ball.dat', sample_unit_lp_data([2], 6, p=2, seed=4))
        output_path = self.root / 'ball.json'
        config = self.write('fit.cfg', (
            'family = bsym\n'
            'v = vec\n'
            'w = fixed(0)\n'
            'u = moment(1, vec)\n'
            'cone = psd(n+1)\n'
            'n0 = 2\n'
            f'data = {data}\n'
            f'output = {output_path}\n'
            'restarts = 1\n'
            'max_alternations = 2\n'
        ))
        output = self.call('fit', config)
        self.assertIn('Objective', output)
        description = read_description(output_path)
        self.assertEqual(description.name, 'ball')
        metrics = json.loads(Path(f'{output_path}.metrics.json').read_text())
        self.assertEqual(metrics['restart'], 0)

    def test_fit_needs_data(self):
        """Test missing required keys are reported"""
        config = self.write('fit.cfg', 'v = vec(sym)\nn0 = 2\n')
        with self.assertRaisesMessage(CommandError, 'config is missing'):
            self.call('fit', config)


class ReduceCommandTest(CommandTestCase):
    def test_reduce_sdp(self):
        """Test the reduced max-cut SDP agrees with the full one"""
        program = self.write('maxcut.json', {
            'format': 'freesets-sdp',
            'version': 1,
            'sequence': 'vec(sym)',
            'level': 4,
            'sense': 'max',
            'objective': [[i, j, 1.0] for i in range(4) for j in range(i + 1, 4)],
            'constraints': [{'entries': [[i, i, 1.0]], 'rhs': 1.0} for i in range(4)],
        })
        dump = self.root / 'reduced.txt'
        output = self.call('reduce', program, '--verify', '--output', str(dump))
        self.assertIn('Reduced and full values agree', output)
        self.assertTrue(dump.read_text().startswith('# freesets conic program v1'))
        value = float(output.split('Reduced value: ')[1].split()[0])
        self.assertAlmostEqual(value, 12.0, places=4)

    def test_reduce_sage(self):
        """Test SAGE membership through the reduced program"""
        program = self.write('sage.json', {
            'format': 'freesets-sage',
            'version': 1,
            'family': 'sym',
            'level': 3,
            'a_points': [[2, 0, 0], [0, 2, 0], [0, 0, 2]],
            'b_points': [[2 / 3, 2 / 3, 2 / 3]],
            'a_coefficients': [1, 1, 1],
            'b_coefficients': [-2.5],
        })
        output = self.call('reduce', program, '--verify')
        self.assertIn('SAGE membership: yes', output)
        self.assertIn('Reduced and full membership agree', output)

    def test_non_invariant_program(self):
        """Test non-invariant data fail the command"""
        program = self.write('bad.json', {
            'format': 'freesets-sdp',
            'version': 1,
            'sequence': 'vec(sym)',
            'level': 3,
            'objective': [[0, 0, 1.0]],
        })
        with self.assertRaisesMessage(CommandError, 'not invariant'):
            self.call('reduce', program)

    def test_bad_file(self):
        """Test unreadable program files become a CommandError"""
        with self.assertRaises(CommandError):
            self.call('reduce', self.write('broken.json', '{"format": "freesets-sdp"'))


class FailingCommand(FreesetsCommand):
    def __init__(self, error):
        super().__init__()
        self.error = error

    def run(self, **options):
        raise self.error


class CommandErrorTest(SimpleTestCase):
    def test_validation_error_names_fields(self):
        """Test validation errors keep the field names in the command error"""
        command = FailingCommand(ValidationError({'levels': ['must be increasing']}))
        with self.assertRaisesMessage(CommandError, 'levels: must be increasing'):
            command.handle()

    def test_validation_error_list(self):
        """Test list validation errors are joined into one message"""
        command = FailingCommand(ValidationError(['first', 'second']))
        with self.assertRaisesMessage(CommandError, 'first second'):
            command.handle()

    def test_library_error(self):
        """Test library errors become command errors with their message"""
        command = FailingCommand(InvalidDescription('u0 is not invariant'))
        with self.assertRaisesMessage(CommandError, 'u0 is not invariant'):
            command.handle()
