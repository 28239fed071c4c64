from concurrent.futures import ThreadPoolExecutor

from ...equivariant import equivariant_basis, invariant_basis, morphism_basis
from ...serializers import parse_levels
from ..base import FreesetsCommand

HEADER = ['level', 'dim_v', 'dim_u', 'invariant_v', 'invariant_u', 'equivariant', 'morphism',
          'morphism_adjoint']


class Command(FreesetsCommand):
    help = 'Count invariants, equivariant maps and morphisms across levels'

    def add_arguments(self, parser):
        parser.add_argument('config', help='Config file with v, u and levels (family optional)')
        parser.add_argument(
            '--levels',
            type=str,
            help='Override the config levels, e.g. 2..8'
        )
        parser.add_argument(
            '--skip-morphisms',
            action='store_true',
            help='Only count invariants and equivariant maps'
        )
        self.add_jobs_argument(parser)
        self.add_csv_argument(parser)

    def run(self, **options):
        config = self.config(options['config'])
        if options['levels']:
            config['levels'] = parse_levels(options['levels'])
        self.require(config, 'v', 'levels')
        seq_v = config['v']
        seq_u = config.get('u') or seq_v
        skip = options['skip_morphisms']

        def row(n):
            counts = [
                n,
                seq_v.dim(n),
                seq_u.dim(n),
                invariant_basis(seq_v, n).dimension,
                invariant_basis(seq_u, n).dimension,
                equivariant_basis(seq_v, seq_u, n).dimension,
            ]
            if skip:
                return counts + ['', '']
            return counts + [
                morphism_basis(seq_v, seq_u, n).dimension,
                morphism_basis(seq_v, seq_u, n, with_adjoint=True).dimension,
            ]

        levels = config['levels']
        if options['jobs'] > 1:
            with ThreadPoolExecutor(max_workers=options['jobs']) as pool:
                rows = list(pool.map(row, levels))
        else:
            rows = [row(n) for n in levels]

        if options['csv']:
            self.write_csv(HEADER, rows)
            return
        self.stdout.write(f'📐 V = {seq_v}, U = {seq_u}')
        self.stdout.write('  '.join(f'{name:>16}' for name in HEADER))
        for values in rows:
            self.stdout.write('  '.join(f'{value:>16}' for value in values))
