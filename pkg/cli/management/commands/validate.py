import json

from cli.base import SelectionEvalCommand
from cli.exceptions import ValidationFailure
from cli.serializers import FAULT_NONE, FAULT_WEIGHTS_NOT_INVERTED
from cli.serializers import Command as RunCommand
from cli.serializers import PropertyResultSerializer
from cli.validation import run_validation_suite


class Command(SelectionEvalCommand):
    help = 'Check the weighted estimators against brute-force oracles and scikit-learn'
    run_command = RunCommand.VALIDATE
    write_csv_default = False
    write_svg_default = False

    def add_command_arguments(self, parser):
        parser.add_argument('--quick', action='store_true', default=None, help='Fewer instances and a smaller n')
        parser.add_argument('--fault', choices=[FAULT_NONE, FAULT_WEIGHTS_NOT_INVERTED],
                            help='Inject a known defect; the suite must then fail')

    def default_params(self):
        return {'quick': False, 'fault': FAULT_NONE}

    def param_flags(self, options):
        return {key: options[key] for key in ('quick', 'fault') if options.get(key) is not None}

    def run(self, cfg):
        results = run_validation_suite(cfg.seed, quick=cfg.params['quick'], fault=cfg.params['fault'])
        for result in results:
            if result.passed:
                self.stdout.write(self.style.SUCCESS(f'PASS {result.name} ({result.checked} checks)'))
            else:
                self.stdout.write(self.style.ERROR(f'FAIL {result.name}: {result.detail}'))

        data = PropertyResultSerializer(results, many=True).data
        if cfg.json:
            self.write_json(cfg, 'validate.json', {'seed': cfg.seed, 'properties': data})

        failures = [item for item, result in zip(data, results) if not result.passed]
        if failures:
            repro = '\n'.join(
                f'{item["name"]}: {json.dumps(item["counterexample"], sort_keys=True)}' for item in failures
            )
            raise ValidationFailure(
                f'{len(failures)} propert{"y" if len(failures) == 1 else "ies"} failed\n{repro}',
                failures=failures,
            )
        self.stdout.write(self.style.SUCCESS('all properties passed'))
