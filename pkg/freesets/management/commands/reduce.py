from pathlib import Path

from django.core.management.base import CommandError

from ...fileformats import read_program
from ...solver import dump_program, solve
from ...symmetry_reduction import (
    InvariantREProgram,
    InvariantSDP,
    full_program,
    full_re_program,
    reduce_program,
    reduce_re_program,
    sage_membership,
)
from ..base import FreesetsCommand

AGREEMENT_TOLERANCE = 1e-6


class Command(FreesetsCommand):
    help = 'Symmetry-reduce an invariant SDP, relative entropy program or SAGE membership problem'

    def add_arguments(self, parser):
        parser.add_argument(
            'program',
            help='Program file (freesets-sdp, freesets-relent or freesets-sage)'
        )
        parser.add_argument(
            '--output',
            type=str,
            help='Write the reduced program as a sparse text dump'
        )
        parser.add_argument(
            '--verify',
            action='store_true',
            help='Solve the full program too and compare'
        )
        parser.add_argument('--seed', type=int, default=0, help='Seed for the commutant samples')

    def run(self, **options):
        problem = read_program(options['program'])
        if isinstance(problem, InvariantSDP):
            reduced = reduce_program(problem, seed=options['seed']).program
            full = full_program(problem) if options['verify'] else None
        elif isinstance(problem, InvariantREProgram):
            reduced = reduce_re_program(problem)[0]
            full = full_re_program(problem) if options['verify'] else None
        else:
            return self.run_sage(problem, options)

        self.stdout.write(
            f'✂️  Reduced program: {reduced.num_variables} variables, '
            f'cones {", ".join(str(block) for block in reduced.cones)}'
        )
        self.write_output(reduced, options)
        value = solve(reduced).objective
        self.stdout.write(f'  Reduced value: {value!r}')
        if full is None:
            return
        full_value = solve(full).objective
        self.stdout.write(f'  Full value ({full.num_variables} variables): {full_value!r}')
        if abs(full_value - value) > AGREEMENT_TOLERANCE * max(1.0, abs(full_value)):
            raise CommandError(f'reduced and full values differ: {value!r} vs {full_value!r}')
        self.stdout.write(self.style.SUCCESS('✅ Reduced and full values agree'))

    def run_sage(self, instance, options):
        reduced = instance.reduced()
        self.stdout.write(
            f'✂️  Reduced SAGE program: {len(reduced.a_orbits)} A-orbits, '
            f'{len(reduced.b_orbits)} B-orbits, {reduced.program.num_variables} variables'
        )
        self.write_output(reduced.program, options)
        member = sage_membership(reduced)
        self.stdout.write(f'  SAGE membership: {"yes" if member else "no"}')
        if not options['verify']:
            return
        full_member = sage_membership(instance.full())
        if full_member != member:
            raise CommandError('reduced and full SAGE membership disagree')
        self.stdout.write(self.style.SUCCESS('✅ Reduced and full membership agree'))

    def write_output(self, program, options):
        if options['output']:
            with Path(options['output']).open('w') as stream:
                dump_program(program, stream)
            self.stdout.write(f'  Wrote {options["output"]}')
