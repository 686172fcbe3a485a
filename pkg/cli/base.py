"""
Shared plumbing for the management commands.

Every command merges settings defaults, an optional JSON config file and
explicit flags into a RunConfig, runs, and writes its reports. Library
exceptions are translated into exit codes here:

    0  success
    1  configuration error (bad flags, bad config file, bad parameters)
    2  runtime or data error (unreadable population, positivity, partial failure)
    3  validation failure
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from evaluation.exceptions import InvalidParameterError, SelectionEvalError
from evaluation.metrics import ALL_METRICS, DEFAULT_CALIBRATION_BINS, DEFAULT_THRESHOLD, MetricName
from experiments.runner import ScenarioResult, run_scenario
from experiments.serializers import ScenarioResultSerializer
from synthetic.dgp import DeltaMode, Scenario, ScenarioSpec

from .exceptions import EXIT_CONFIG, EXIT_RUNTIME, EXIT_VALIDATION, ConfigError, ValidationFailure
from .serializers import Command as RunCommand
from .serializers import RunConfig, RunConfigSerializer, format_errors
from .svg import render_calibration_svg

logger = logging.getLogger(__name__)

GLOBAL_KEYS = ('seed', 'n', 'n_reps', 'output_dir', 'csv', 'json', 'svg', 'workers')


def comma_floats(value: str) -> List[float]:
    try:
        return [float(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma separated numbers, got {value!r}')


class SelectionEvalCommand(BaseCommand):
    run_command: RunCommand
    reps_setting = 'SELECTION_EVAL_SCENARIO_REPS'
    reps_default = 100
    write_csv_default = True
    write_svg_default = True

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # argument errors raise CommandError so they share the config exit code
        parser.called_from_command_line = False
        return parser

    def run_from_argv(self, argv):
        try:
            super().run_from_argv(argv)
        except CommandError as exc:
            self.stderr.write(f'CommandError: {exc}')
            sys.exit(EXIT_CONFIG)

    def add_arguments(self, parser):
        parser.add_argument('--seed', type=int, help='Root seed (default: SELECTION_EVAL_SEED)')
        parser.add_argument('--n', type=int, help='Population size per replicate (default: SELECTION_EVAL_N)')
        parser.add_argument('--reps', type=int, dest='n_reps', help='Replicates')
        parser.add_argument('--out', dest='output_dir', help='Output directory (default: SELECTION_EVAL_OUTPUT_DIR)')
        parser.add_argument('--csv', action=argparse.BooleanOptionalAction, default=None, help='Write CSV reports')
        parser.add_argument('--json', action=argparse.BooleanOptionalAction, default=None, help='Write JSON reports')
        parser.add_argument('--svg', action=argparse.BooleanOptionalAction, default=None, help='Write SVG figures')
        parser.add_argument('--workers', type=int, help='Replicate worker threads (default: SELECTION_EVAL_WORKERS)')
        parser.add_argument('--config', dest='config_file', help='JSON config file; explicit flags win over it')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def default_params(self) -> Dict[str, Any]:
        return {}

    def param_flags(self, options) -> Dict[str, Any]:
        return {}

    def default_config(self) -> Dict[str, Any]:
        return {
            'command': self.run_command.value,
            'seed': getattr(settings, 'SELECTION_EVAL_SEED', 20220101),
            'n': getattr(settings, 'SELECTION_EVAL_N', 10000),
            'n_reps': getattr(settings, self.reps_setting, self.reps_default),
            'output_dir': str(getattr(settings, 'SELECTION_EVAL_OUTPUT_DIR', 'reports')),
            'csv': self.write_csv_default,
            'json': False,
            'svg': self.write_svg_default,
            'workers': getattr(settings, 'SELECTION_EVAL_WORKERS', 1),
        }

    def read_config_file(self, path: Optional[str]) -> Dict[str, Any]:
        if not path:
            return {}
        try:
            with open(path, encoding='utf-8') as f:
                data = json.load(f)
        except OSError as exc:
            raise ConfigError(f'cannot read config file {path}: {exc.strerror}')
        except json.JSONDecodeError as exc:
            raise ConfigError(f'config file {path} line {exc.lineno}: {exc.msg}')
        if not isinstance(data, dict):
            raise ConfigError(f'config file {path} must hold a JSON object')
        command = data.pop('command', self.run_command.value)
        if command != self.run_command.value:
            raise ConfigError(f'config file {path} is for {command!r}, not {self.run_command.value!r}')
        return data

    def build_config(self, options) -> RunConfig:
        file_data = self.read_config_file(options.get('config_file'))
        file_params = file_data.pop('params', {})
        if not isinstance(file_params, dict):
            raise ConfigError('config "params" must be a JSON object')
        flag_params = self.param_flags(options)
        self.explicit_params = set(file_params) | set(flag_params)

        merged = {**self.default_config(), **file_data}
        merged.update({key: options[key] for key in GLOBAL_KEYS if options.get(key) is not None})
        merged['params'] = {**self.default_params(), **file_params, **flag_params}

        serializer = RunConfigSerializer(data=merged)
        if not serializer.is_valid():
            raise ConfigError(format_errors(serializer.errors))
        return serializer.to_run_config()

    def handle(self, *args, **options):
        try:
            cfg = self.build_config(options)
            self.run(cfg)
        except ConfigError as exc:
            raise CommandError(exc.message, returncode=EXIT_CONFIG)
        except ValidationFailure as exc:
            raise CommandError(exc.message, returncode=EXIT_VALIDATION)
        except InvalidParameterError as exc:
            raise CommandError(exc.message, returncode=EXIT_CONFIG)
        except SelectionEvalError as exc:
            raise CommandError(exc.message, returncode=EXIT_RUNTIME)
        except OSError as exc:
            raise CommandError(f'cannot write reports: {exc}', returncode=EXIT_RUNTIME)

    def run(self, cfg: RunConfig):
        raise NotImplementedError

    def write_report(self, cfg: RunConfig, name: str, content: str) -> Path:
        path = cfg.output_dir / name
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(content)
        self.stdout.write(self.style.SUCCESS(f'  wrote {path}'))
        return path

    def write_json(self, cfg: RunConfig, name: str, data) -> Path:
        return self.write_report(cfg, name, json.dumps(data, indent=2) + '\n')


class ScenarioSuiteCommand(SelectionEvalCommand):
    """Runs the selected scenarios; shared by the scenarios and calibration commands."""

    def add_command_arguments(self, parser):
        parser.add_argument('--threshold', type=float, help='Decision threshold (default: SELECTION_EVAL_THRESHOLD)')
        parser.add_argument('--bins', type=int, help='Calibration bins (default: SELECTION_EVAL_CALIBRATION_BINS)')
        parser.add_argument('--delta-mode', choices=[m.value for m in DeltaMode],
                            help='Maximum distance used by select_easy: feature support or sample')
        parser.add_argument('--scenario', action='append', choices=[s.value for s in Scenario],
                            help='Run only this scenario (repeatable)')

    def default_params(self):
        return {
            'threshold': DEFAULT_THRESHOLD,
            'bins': DEFAULT_CALIBRATION_BINS,
            'delta_mode': DeltaMode.SUPPORT.value,
            'scenarios': [s.value for s in Scenario],
            'metrics': [m.value for m in ALL_METRICS],
        }

    def param_flags(self, options):
        flags = {}
        for key in ('threshold', 'bins', 'delta_mode'):
            if options.get(key) is not None:
                flags[key] = options[key]
        if options.get('scenario'):
            flags['scenarios'] = options['scenario']
        if options.get('metric'):
            flags['metrics'] = options['metric']
        return flags

    def run_suite(self, cfg: RunConfig, metrics) -> Tuple[List[ScenarioResult], List[Tuple[ScenarioSpec, SelectionEvalError]]]:
        params = cfg.params
        delta_mode = DeltaMode(params['delta_mode'])
        specs = [ScenarioSpec(Scenario(slug), delta_mode=delta_mode) for slug in params['scenarios']]
        specs.sort(key=lambda spec: spec.scenario.number)

        results, failed = [], []
        for spec in specs:
            self.stdout.write(
                f'Scenario {spec.scenario.number} ({spec.slug}): {cfg.n_reps} replicates of n={cfg.n}'
            )
            try:
                results.append(run_scenario(
                    spec, cfg.n, cfg.n_reps,
                    threshold=params['threshold'],
                    seed=cfg.seed,
                    metrics=metrics,
                    n_bins=params['bins'],
                    workers=cfg.workers,
                ))
            except InvalidParameterError:
                raise
            except SelectionEvalError as exc:
                logger.error(f'{spec.slug} failed: {exc.message}')
                self.stdout.write(self.style.ERROR(f'  {spec.slug} failed: {exc.message}'))
                failed.append((spec, exc))
        return results, failed

    def write_calibration_figures(self, cfg: RunConfig, results: List[ScenarioResult]):
        if not cfg.svg:
            return
        for result in results:
            self.write_report(cfg, f'calibration_{result.spec.slug}.svg', render_calibration_svg(result))

    def write_results_json(self, cfg: RunConfig, name: str, results: List[ScenarioResult]):
        if cfg.json:
            self.write_json(cfg, name, {'results': ScenarioResultSerializer(results, many=True).data})

    @staticmethod
    def raise_for_failures(failed):
        if failed:
            names = ', '.join(spec.slug for spec, _ in failed)
            raise SelectionEvalError(f'{len(failed)} scenario(s) failed: {names}; completed outputs were kept')

    @staticmethod
    def selected_metrics(cfg: RunConfig) -> List[MetricName]:
        return [MetricName(m) for m in cfg.params['metrics']]
