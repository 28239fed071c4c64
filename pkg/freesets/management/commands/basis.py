from pathlib import Path

from ...equivariant import ConstraintClass, equivariant_basis, invariant_basis, morphism_basis
from ...fileformats import write_triplets
from ..base import FreesetsCommand


class Command(FreesetsCommand):
    help = 'Export an invariant, equivariant or morphism basis as sparse triplets'

    def add_arguments(self, parser):
        parser.add_argument('config', help='Config file with v (and u for maps)')
        parser.add_argument(
            '--level',
            type=int,
            help='Level of the basis (default: n0 from the config)'
        )
        parser.add_argument(
            '--kind',
            choices=[c.value for c in ConstraintClass],
            default=ConstraintClass.EQUIVARIANT.value,
            help='Basis to export (default: equivariant)'
        )
        parser.add_argument('--output', type=str, help='Write to this file instead of stdout')

    def run(self, **options):
        config = self.config(options['config'])
        self.require(config, 'v')
        level = options['level'] or config.get('n0')
        if level is None:
            self.require(config, 'n0')
        seq_v = config['v']
        seq_u = config.get('u') or seq_v
        kind = ConstraintClass(options['kind'])
        if kind is ConstraintClass.INVARIANT:
            basis = invariant_basis(seq_v, level)
        elif kind is ConstraintClass.EQUIVARIANT:
            basis = equivariant_basis(seq_v, seq_u, level)
        else:
            basis = morphism_basis(
                seq_v, seq_u, level, with_adjoint=kind is ConstraintClass.MORPHISM_WITH_ADJOINT
            )
        label = f'{kind.value} basis of {seq_v}'
        if kind is not ConstraintClass.INVARIANT:
            label += f' -> {seq_u}'
        label += f' at level {level}; columns are metric-orthonormal'

        if options['output']:
            with Path(options['output']).open('w') as stream:
                write_triplets(basis.vectors, stream, label)
            self.stdout.write(
                self.style.SUCCESS(
                    f'✅ Wrote {basis.dimension} basis vectors to {options["output"]}'
                )
            )
        else:
            write_triplets(basis.vectors, self.stdout, label)
