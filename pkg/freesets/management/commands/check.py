import json

from ...descriptions import Verdict, certify_compatibility
from ..base import FreesetsCommand


class Command(FreesetsCommand):
    help = 'Certify intersection and projection compatibility of a free description'

    def add_arguments(self, parser):
        self.add_description_arguments(parser)
        parser.add_argument(
            '--levels',
            type=int,
            default=2,
            help='Number of level pairs above n0 to check the cone condition on (default: 2)'
        )
        parser.add_argument('--json', action='store_true', help='Print the report as JSON')

    def run(self, **options):
        description = self.description(options)
        report = certify_compatibility(description, options['levels'])
        if options['json']:
            self.stdout.write(json.dumps(report.as_dict(), indent=1))
            return

        self.stdout.write(f'🔍 Checking {description.name or "description"} ({description})')
        for line in report.lines():
            self.stdout.write(f'  {line}')
        for label, verdict in (('Intersection', report.intersection),
                               ('Projection', report.projection)):
            if verdict is Verdict.CERTIFIED:
                self.stdout.write(self.style.SUCCESS(f'✅ {label} compatibility certified'))
            elif verdict is Verdict.CERTIFIED_UP_TO:
                self.stdout.write(self.style.WARNING(
                    f'⚠️  {label} compatibility certified up to level {report.checked_through}'
                ))
            else:
                self.stdout.write(self.style.ERROR(f'❌ {label} compatibility {verdict.value}'))
