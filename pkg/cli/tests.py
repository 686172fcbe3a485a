import json
import os
import shutil
import tempfile
from io import StringIO
from xml.etree import ElementTree

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from deployment.populations import synthetic_clinical_population
from deployment.sweeps import sweep_p_t, sweep_p_withhold
from experiments.runner import run_scenario
from synthetic.dgp import Scenario, ScenarioSpec

from .exceptions import EXIT_CONFIG, EXIT_RUNTIME, EXIT_VALIDATION
from .management.commands.scenarios import Command as ScenariosCommand
from .serializers import FAULT_WEIGHTS_NOT_INVERTED, RunConfigSerializer, format_errors
from .svg import render_calibration_svg, render_sweep_svg
from .validation import (
    check_pairwise_auroc,
    check_replication,
    check_selection_probabilities,
    check_unit_weight,
    pairwise_auroc,
    run_validation_suite,
    selection_consistency_pvalue,
)


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        self.out_dir = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, self.out_dir, ignore_errors=True)

    def call(self, name, *args, **options):
        stdout = StringIO()
        options.setdefault('output_dir', self.out_dir)
        call_command(name, *args, stdout=stdout, stderr=StringIO(), **options)
        return stdout.getvalue()

    def read(self, name, directory=None):
        with open(os.path.join(directory or self.out_dir, name), encoding='utf-8') as f:
            return f.read()

    def write_file(self, name, content):
        path = os.path.join(self.out_dir, name)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(content)
        return path


class ScenariosCommandTests(CommandTestCase):
    def test_full_grid(self):
        stdout = self.call('scenarios', n=400, n_reps=3, seed=11)
        self.assertIn('Scenario 1 (scar)', stdout)
        self.assertEqual(len(self.read('table1.csv').splitlines()), 91)
        self.assertEqual(len(self.read('calibration.csv').splitlines()), 76)
        for scenario in Scenario:
            self.assertTrue(os.path.exists(os.path.join(self.out_dir, f'calibration_{scenario.value}.svg')))
        self.assertFalse(os.path.exists(os.path.join(self.out_dir, 'table1.json')))

    def test_byte_identical_across_worker_counts(self):
        other = tempfile.mkdtemp()
        self.addCleanup(shutil.rmtree, other, ignore_errors=True)
        self.call('scenarios', n=300, n_reps=4, seed=5, workers=1, svg=False)
        self.call('scenarios', n=300, n_reps=4, seed=5, workers=3, svg=False, output_dir=other)
        self.assertEqual(self.read('table1.csv'), self.read('table1.csv', other))
        self.assertEqual(self.read('calibration.csv'), self.read('calibration.csv', other))

    def test_scenario_and_metric_filter(self):
        self.call('scenarios', '--scenario', 'select_hard', '--metric', 'auroc', n=400, n_reps=2, svg=False, json=True)
        lines = self.read('table1.csv').splitlines()
        self.assertEqual(len(lines), 4)
        self.assertTrue(all(line.startswith('select_hard,auroc,') for line in lines[1:]))
        data = json.loads(self.read('table1.json'))
        self.assertEqual([r['spec']['scenario'] for r in data['results']], ['select_hard'])

    def test_config_file_and_flag_precedence(self):
        path = self.write_file('run.json', json.dumps({
            'n': 300, 'n_reps': 2, 'svg': False, 'params': {'scenarios': ['scar'], 'metrics': ['ppv']},
        }))
        self.call('scenarios', config_file=path, n_reps=3)
        lines = self.read('table1.csv').splitlines()
        self.assertEqual(len(lines), 4)
        self.assertIn(',ppv,', lines[1])

    def test_unknown_config_key(self):
        path = self.write_file('run.json', json.dumps({'n': 300, 'bogus': 1}))
        with self.assertRaises(CommandError) as ctx:
            self.call('scenarios', config_file=path)
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)
        self.assertIn('bogus', str(ctx.exception))

    def test_unknown_params_key(self):
        path = self.write_file('run.json', json.dumps({'params': {'thresh': 0.4}}))
        with self.assertRaises(CommandError) as ctx:
            self.call('scenarios', config_file=path)
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

    def test_malformed_config_file(self):
        path = self.write_file('run.json', '{"n": ')
        with self.assertRaises(CommandError) as ctx:
            self.call('scenarios', config_file=path)
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

    def test_config_for_other_command(self):
        path = self.write_file('run.json', json.dumps({'command': 'validate'}))
        with self.assertRaises(CommandError) as ctx:
            self.call('scenarios', config_file=path)
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

    def test_invalid_values(self):
        for options in ({'n_reps': 0}, {'n': -5}, {'threshold': 1.5}, {'bins': 0}):
            with self.subTest(options=options), self.assertRaises(CommandError) as ctx:
                self.call('scenarios', **options)
            self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

    def test_parse_error(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('scenarios', '--scenario', 'no_such_scenario')
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

    def test_parse_error_from_argv_exits_with_config_code(self):
        command = ScenariosCommand(stdout=StringIO(), stderr=StringIO())
        with self.assertRaises(SystemExit) as ctx:
            command.run_from_argv(['manage.py', 'scenarios', '--n', 'many'])
        self.assertEqual(ctx.exception.code, EXIT_CONFIG)


class CalibrationCommandTests(CommandTestCase):
    def test_outputs(self):
        self.call('calibration', '--scenario', 'scar', '--scenario', 'select_negative', n=400, n_reps=2, json=True)
        self.assertEqual(len(self.read('calibration.csv').splitlines()), 1 + 2 * 3 * 5)
        self.assertTrue(os.path.exists(os.path.join(self.out_dir, 'calibration_scar.svg')))
        data = json.loads(self.read('calibration.json'))
        self.assertEqual(data['results'][0]['triplets'], [])
        self.assertFalse(os.path.exists(os.path.join(self.out_dir, 'table1.csv')))


class DeploySweepCommandTests(CommandTestCase):
    small = {'n': 1000, 'n_reps': 4, 'seed': 2}

    def test_grids_and_outputs(self):
        self.call('deploy_sweep', '--pt-grid', '0.95,0.8,0.6', '--withhold-grid', '0.5,0.1', json=True, **self.small)
        pt_lines = self.read('sweep_pt.csv').splitlines()
        withhold_lines = self.read('sweep_withhold.csv').splitlines()
        self.assertEqual(len(pt_lines), 1 + 3 * 3)
        self.assertEqual(len(withhold_lines), 1 + 2 * 3)
        self.assertTrue(pt_lines[1].startswith('p_t,0.95,actual,'))
        ElementTree.fromstring(self.read('sweeps.svg').encode('utf-8'))
        data = json.loads(self.read('sweeps.json'))
        self.assertEqual(data['population']['provenance'], 'clinical')
        self.assertEqual(len(data['p_withhold_sweep']), 2)

    def test_every_clinical_prevalence(self):
        self.call('deploy_sweep', '--pop', 'clinical_all', '--pt-grid', '0.95,0.7', '--withhold-grid', '0.5',
                  json=True, **self.small)
        for tag, prevalence in (('prev79', 0.79), ('prev57', 0.57), ('prev27', 0.27)):
            with self.subTest(tag):
                self.assertEqual(len(self.read(f'sweep_pt_{tag}.csv').splitlines()), 1 + 2 * 3)
                self.assertEqual(len(self.read(f'sweep_withhold_{tag}.csv').splitlines()), 1 + 3)
                data = json.loads(self.read(f'sweeps_{tag}.json'))
                self.assertAlmostEqual(data['population']['prevalence'], prevalence, delta=0.05)
        self.assertFalse(os.path.exists(os.path.join(self.out_dir, 'sweep_pt.csv')))
        svg = self.read('sweeps.svg')
        ElementTree.fromstring(svg.encode('utf-8'))
        self.assertIn('prevalence 0.27: AUROC over alert threshold p_t', svg)
        self.assertEqual(svg.count('AUROC over withholding probability'), 3)

    def test_single_point_without_ablation(self):
        self.call('deploy_sweep', '--p-t', '0.9', '--p-withhold', '1.0', svg=False, **self.small)
        lines = self.read('sweep_pt.csv').splitlines()
        self.assertEqual(len(lines), 4)
        means = {line.split(',')[3] for line in lines[1:]}
        self.assertEqual(len(means), 1)

    def test_external_two_row_file(self):
        path = self.write_file('scores.csv', 'score,label\n0.97,1\n0.02,0\n')
        with self.assertLogs('deployment.populations', 'WARNING'):
            self.call('deploy_sweep', '--pop', 'external', '--file', path, '--pt-grid', '0.9',
                      '--withhold-grid', '0.5', svg=False, n_reps=10)
        self.assertEqual(len(self.read('sweep_pt.csv').splitlines()), 4)

    def test_malformed_file_names_line(self):
        path = self.write_file('scores.csv', 'score,label\n0.9,1\nhigh,0\n')
        with self.assertRaises(CommandError) as ctx:
            self.call('deploy_sweep', '--pop', 'external', '--file', path, **self.small)
        self.assertEqual(ctx.exception.returncode, EXIT_RUNTIME)
        self.assertIn('line 3', str(ctx.exception))

    def test_missing_file(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('deploy_sweep', '--pop', 'external', '--file', os.path.join(self.out_dir, 'nope.csv'))
        self.assertEqual(ctx.exception.returncode, EXIT_RUNTIME)

    def test_external_needs_file(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('deploy_sweep', '--pop', 'external')
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

    def test_positivity_violation(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('deploy_sweep', '--p-withhold', '0', '--pt-grid', '0.9', svg=False, **self.small)
        self.assertEqual(ctx.exception.returncode, EXIT_RUNTIME)
        self.assertIn('positivity', str(ctx.exception))

    def test_bad_grid(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('deploy_sweep', '--pt-grid', '0.9,x')
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)
        with self.assertRaises(CommandError) as ctx:
            self.call('deploy_sweep', '--pt-grid', '0.6,0.9', **self.small)
        self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)


class ValidateCommandTests(CommandTestCase):
    def test_quick_passes(self):
        stdout = self.call('validate', '--quick', json=True)
        self.assertEqual(stdout.count('PASS'), 4)
        data = json.loads(self.read('validate.json'))
        self.assertTrue(all(p['passed'] for p in data['properties']))

    def test_injected_fault_fails(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('validate', '--quick', '--fault', FAULT_WEIGHTS_NOT_INVERTED)
        self.assertEqual(ctx.exception.returncode, EXIT_VALIDATION)
        self.assertIn('pairwise_auroc', str(ctx.exception))


class ValidationPropertyTests(SimpleTestCase):
    def test_pairwise_auroc(self):
        scores = np.array([0.9, 0.5, 0.5, 0.1])
        labels = np.array([1, 1, 0, 0])
        self.assertAlmostEqual(pairwise_auroc(scores, labels, np.ones(4)), 0.875)
        self.assertAlmostEqual(pairwise_auroc(scores, labels, np.array([1.0, 3.0, 1.0, 1.0])), 0.8125)

    def test_properties_hold(self):
        for result in (
            check_pairwise_auroc(3, 100),
            check_replication(3, 100),
            check_unit_weight(3, 100),
            check_selection_probabilities(3, 2000),
        ):
            with self.subTest(result.name):
                self.assertTrue(result.passed, result.detail)

    def test_fault_is_detected(self):
        for result in (
            check_pairwise_auroc(3, 100, FAULT_WEIGHTS_NOT_INVERTED),
            check_replication(3, 100, FAULT_WEIGHTS_NOT_INVERTED),
            check_selection_probabilities(3, 2000, FAULT_WEIGHTS_NOT_INVERTED),
        ):
            with self.subTest(result.name):
                self.assertFalse(result.passed)
                self.assertIsNotNone(result.counterexample)

    def test_consistency_pvalue(self):
        rng = np.random.default_rng(0)
        probs = rng.uniform(0.1, 1.0, 5000)
        self.assertGreater(selection_consistency_pvalue(rng.random(5000) < probs, probs), 0.001)
        self.assertLess(selection_consistency_pvalue(np.ones(5000, dtype=bool), probs), 0.001)

    def test_suite_order(self):
        names = [r.name for r in run_validation_suite(1, quick=True)]
        self.assertEqual(names, ['pairwise_auroc', 'replication', 'unit_weight', 'selection_prob'])


class SvgTests(SimpleTestCase):
    def test_calibration_figure(self):
        result = run_scenario(ScenarioSpec(Scenario.SELECT_HARD), 400, 3, seed=4)
        svg = render_calibration_svg(result)
        root = ElementTree.fromstring(svg.encode('utf-8'))
        self.assertTrue(root.tag.endswith('svg'))
        self.assertIn('Scenario 2', svg)
        self.assertEqual(svg, render_calibration_svg(result))

    def test_sweep_figure(self):
        population = synthetic_clinical_population(500, 0.57, 2.0, seed=1)
        pt_rows = sweep_p_t(population, [0.95, 0.7], n_reps=3, seed=1)
        withhold_rows = sweep_p_withhold(population, [0.5, 0.05], n_reps=3, seed=1)
        svg = render_sweep_svg(pt_rows, withhold_rows, p_withhold=0.05, p_t=0.9)
        ElementTree.fromstring(svg.encode('utf-8'))
        self.assertEqual(svg.count('<polygon'), 6)
        self.assertIn('p_withhold = 0.05', svg)


class RunConfigSerializerTests(SimpleTestCase):
    def base(self, **overrides):
        data = {
            'command': 'validate', 'seed': 1, 'n': 10, 'n_reps': 1, 'output_dir': tempfile.mkdtemp(),
            'csv': False, 'json': False, 'svg': False, 'workers': 1,
            'params': {'quick': True, 'fault': 'none'},
        }
        self.addCleanup(shutil.rmtree, data['output_dir'], ignore_errors=True)
        data.update(overrides)
        return data

    def test_valid(self):
        serializer = RunConfigSerializer(data=self.base())
        self.assertTrue(serializer.is_valid(), serializer.errors)
        cfg = serializer.to_run_config()
        self.assertEqual(cfg.params, {'quick': True, 'fault': 'none'})

    def test_negative_seed(self):
        serializer = RunConfigSerializer(data=self.base(seed=-1))
        self.assertFalse(serializer.is_valid())
        self.assertIn('seed', format_errors(serializer.errors))

    def test_params_errors_are_prefixed(self):
        serializer = RunConfigSerializer(data=self.base(params={'quick': True, 'fault': 'bad'}))
        self.assertFalse(serializer.is_valid())
        self.assertIn('params.fault', format_errors(serializer.errors))
