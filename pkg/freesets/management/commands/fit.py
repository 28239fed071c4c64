from pathlib import Path

from ...fileformats import load_dataset, read_description, write_description, write_metrics
from ...regression import RegressionProblem, fit
from ..base import FreesetsCommand


class Command(FreesetsCommand):
    help = 'Fit a free description to gauge-function data by alternating minimization'

    def add_arguments(self, parser):
        parser.add_argument('config', help='Config file with v, w, u, cone, n0 and data')
        parser.add_argument('--data', type=str, help='Dataset file (overrides the config)')
        parser.add_argument(
            '--output',
            type=str,
            help='Description file to write (overrides the config)'
        )
        parser.add_argument(
            '--metrics',
            type=str,
            help='Metrics file (default: <output>.metrics.json)'
        )
        parser.add_argument('--restarts', type=int, help='Number of random restarts')
        parser.add_argument('--seed', type=int, help='Base seed of the restarts')
        self.add_jobs_argument(parser)

    def run(self, **options):
        config = self.config(options['config'])
        if options['data']:
            config['data'] = options['data']
        if options['output']:
            config['output'] = options['output']
        for key in ('restarts', 'seed'):
            if options[key] is not None:
                config[key] = options[key]
        self.require(config, 'v', 'w', 'u', 'cone', 'n0', 'data', 'output')

        dataset = load_dataset(config['data'], config['v'])
        initial = read_description(config['initial']) if config.get('initial') else None
        problem = RegressionProblem(
            seq_v=config['v'],
            seq_w=config['w'],
            seq_u=config['u'],
            cone=config['cone'],
            n0=config['n0'],
            data=dataset,
            constraint=config['constraint'],
            u_mode=config['u_mode'],
            u_fixed=config.get('u_fixed'),
            lambda_min=config.get('lambda_min'),
            lam=config.get('regularization'),
            restarts=config.get('restarts'),
            max_alternations=config.get('max_alternations'),
            stall_tolerance=config.get('stall_tolerance'),
            stall_rounds=config.get('stall_rounds'),
            norm=config['norm'],
            seed=config['seed'],
            jobs=options['jobs'],
            initial=initial,
            name=config.get('name') or Path(config['output']).stem,
        )
        self.stdout.write(
            f'🔧 Fitting {len(dataset)} points with {problem.restarts} restarts '
            f'(seed {problem.seed})'
        )
        result = fit(problem)

        write_description(result.description, config['output'])
        metrics = options['metrics'] or f'{config["output"]}.metrics.json'
        write_metrics(result, metrics)
        if result.failed_restarts:
            self.stdout.write(
                self.style.WARNING(f'  {result.failed_restarts} restarts ended in solver failures')
            )
        self.stdout.write(
            self.style.SUCCESS(
                f'✅ Objective {result.objective:.3e} from restart {result.restart}, '
                f'λ = {result.lam:.3e}'
            )
        )
        self.stdout.write(f'  Description: {config["output"]}')
        self.stdout.write(f'  Metrics: {metrics}')
