from ...fileformats import load_dataset
from ...regression import Dataset, evaluate_fit
from ..base import FreesetsCommand


class Command(FreesetsCommand):
    help = 'Mean relative gauge error of a description on a dataset, per level'

    def add_arguments(self, parser):
        self.add_description_arguments(parser)
        parser.add_argument('--data', type=str, required=True, help='Dataset file of true values')
        parser.add_argument('--max-level', type=int, help='Ignore records above this level')
        parser.add_argument(
            '--regularization',
            type=float,
            help='Evaluate with this λ instead of the description\'s'
        )
        self.add_jobs_argument(parser)
        self.add_csv_argument(parser)

    def run(self, **options):
        description = self.description(options)
        dataset = load_dataset(options['data'], description.seq_v)
        if options['max_level']:
            keep = [i for i, n in enumerate(dataset.levels) if n <= options['max_level']]
            dataset = Dataset(
                [dataset.levels[i] for i in keep],
                [dataset.points[i] for i in keep],
                dataset.targets[keep],
            )
        table = evaluate_fit(description, dataset, options['regularization'], options['jobs'])

        rows = [[row.level, row.count, repr(row.mean_error), repr(row.max_error)] for row in table]
        if options['csv']:
            self.write_csv(['level', 'count', 'mean_relative_error', 'max_relative_error'], rows)
            return
        self.stdout.write(f'📊 {description.name or "description"} on {options["data"]}')
        for row in table:
            self.stdout.write(
                f'  level {row.level:>3}: {row.count:>5} points, mean error {row.mean_error:.4e}, '
                f'max error {row.max_error:.4e}'
            )
