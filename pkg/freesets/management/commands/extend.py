from pathlib import Path

from scipy import sparse

from ...descriptions import instantiate_description
from ...fileformats import write_triplets
from ..base import FreesetsCommand


class Command(FreesetsCommand):
    help = 'Instantiate a free description at level n and dump A_n, B_n and u_n as sparse triplets'

    def add_arguments(self, parser):
        self.add_description_arguments(parser)
        parser.add_argument('--level', type=int, required=True, help='Target level n')
        parser.add_argument(
            '--output',
            type=str,
            help='Directory for A.txt, B.txt and u.txt (default: stdout)'
        )

    def run(self, **options):
        description = self.description(options)
        n = options['level']
        instance = instantiate_description(description, n)
        pieces = {
            'A': instance.a.matrix,
            'B': instance.b.matrix,
            'u': sparse.csr_matrix(instance.u.reshape(-1, 1)),
        }
        cones = ' + '.join(str(block) for block in instance.cones)

        if not options['output']:
            self.stdout.write(f'# level {n}; cone {cones}; canonical coordinates')
            for name, matrix in pieces.items():
                write_triplets(matrix, self.stdout, f'{name}_{n}')
            return

        directory = Path(options['output'])
        directory.mkdir(parents=True, exist_ok=True)
        for name, matrix in pieces.items():
            with (directory / f'{name}.txt').open('w') as stream:
                write_triplets(matrix, stream, f'{name}_{n}; cone {cones}')
        self.stdout.write(
            self.style.SUCCESS(
                f'✅ Extended {description.name or "description"} to level {n} '
                f'(dim V = {instance.dim_v}, dim W = {instance.dim_w}, '
                f'{len(instance.u)} cone rows) '
                f'in {directory}'
            )
        )
