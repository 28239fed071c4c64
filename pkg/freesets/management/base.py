import csv
import logging

from django.core.management.base import BaseCommand, CommandError

from rest_framework.exceptions import ValidationError

from ..exceptions import FreesetsError
from ..fileformats import apply_tolerances, flatten_detail, load_config, read_description
from ..fixtures import get_fixture

logger = logging.getLogger(__name__)


class FreesetsCommand(BaseCommand):
    """
    Base for freesets commands.

    Subclasses implement ``run``; any FreesetsError it raises becomes a
    CommandError, so the exit code is nonzero exactly when a run fails.
    """

    def add_jobs_argument(self, parser):
        parser.add_argument(
            '--jobs',
            type=int,
            default=1,
            help='Worker threads for restarts, data points or levels (default: 1)'
        )

    def add_csv_argument(self, parser):
        parser.add_argument(
            '--csv',
            action='store_true',
            help='Print a machine-readable CSV table instead of text'
        )

    def add_description_arguments(self, parser):
        parser.add_argument('description', nargs='?', help='Description file')
        parser.add_argument(
            '--fixture',
            type=str,
            help='Use a built-in description (cube, bad_cube, elliptope, ...) instead of a file'
        )

    def handle(self, *args, **options):
        if options.get('jobs') is not None and options['jobs'] < 1:
            raise CommandError('--jobs must be at least 1')
        try:
            return self.run(**options)
        except FreesetsError as exc:
            raise CommandError(str(exc)) from exc
        except ValidationError as exc:
            raise CommandError(flatten_detail(exc.detail)) from exc

    def run(self, **options):
        raise NotImplementedError

    def config(self, path):
        config = load_config(path)
        apply_tolerances(config)
        return config

    def description(self, options):
        if options.get('fixture'):
            if options.get('description'):
                raise CommandError('give a description file or --fixture, not both')
            return get_fixture(options['fixture'])
        if not options.get('description'):
            raise CommandError('a description file or --fixture is required')
        return read_description(options['description'])

    def write_csv(self, header, rows):
        writer = csv.writer(self.stdout, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)

    def require(self, config, *keys):
        missing = [key for key in keys if config.get(key) is None]
        if missing:
            raise CommandError(f'config is missing {", ".join(missing)}')
