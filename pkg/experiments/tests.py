import json

from django.test import SimpleTestCase

from evaluation.exceptions import InvalidParameterError
from evaluation.metrics import ALL_METRICS, MetricName
from synthetic.dgp import Scenario, ScenarioSpec

from .aggregation import PointInterval, percentile_interval, summarize
from .exceptions import MissingScenarioError
from .parallel import map_replicates
from .reports import CALIBRATION_COLUMNS, TABLE1_COLUMNS, calibration_csv, table1_report
from .runner import Estimator, run_scenario
from .serializers import ScenarioResultSerializer


class PercentileIntervalTests(SimpleTestCase):
    def test_singleton(self):
        self.assertEqual(percentile_interval([0.5]), PointInterval(0.5, 0.5, 0.5, n_values=1))

    def test_linear_rank_interpolation(self):
        interval = percentile_interval(range(1, 1001))
        self.assertAlmostEqual(interval.mean, 500.5)
        self.assertAlmostEqual(interval.lo, 25.975, places=9)
        self.assertAlmostEqual(interval.hi, 975.025, places=9)

    def test_constant_values(self):
        interval = percentile_interval([0.7] * 40)
        self.assertAlmostEqual(interval.lo, interval.mean, places=12)
        self.assertAlmostEqual(interval.hi, interval.mean, places=12)

    def test_order_independent(self):
        self.assertEqual(percentile_interval([3.0, 1.0, 2.0]), percentile_interval([1.0, 2.0, 3.0]))

    def test_empty(self):
        with self.assertRaises(InvalidParameterError):
            percentile_interval([])

    def test_bad_percentiles(self):
        with self.assertRaises(InvalidParameterError):
            percentile_interval([1.0, 2.0], 90, 10)

    def test_format(self):
        self.assertEqual(PointInterval(0.634, 0.601, 0.652).format(), '0.63 [0.60, 0.65]')
        self.assertEqual(PointInterval.undefined(3).format(), 'undefined')


class SummarizeTests(SimpleTestCase):
    def test_undefined_values_are_counted(self):
        interval = summarize([0.2, None, 0.4, None])
        self.assertEqual((interval.n_values, interval.n_undefined), (2, 2))
        self.assertAlmostEqual(interval.mean, 0.3)

    def test_all_undefined(self):
        interval = summarize([None, None])
        self.assertFalse(interval.is_defined)
        self.assertEqual(interval.n_undefined, 2)


class MapReplicatesTests(SimpleTestCase):
    def test_order_kept_with_threads(self):
        self.assertEqual(map_replicates(lambda x: x * x, list(range(20)), workers=4), [x * x for x in range(20)])


class RunScenarioTests(SimpleTestCase):
    def test_all_selected_estimators_coincide(self):
        result = run_scenario(ScenarioSpec(Scenario.SCAR, pi1=1.0), n=500, n_reps=3, seed=1)
        for triplet in result.triplets:
            self.assertEqual(triplet.actual, triplet.observed)
            self.assertEqual(triplet.actual, triplet.weighted)
        self.assertEqual(result.mean_observed_fraction, 1.0)

    def test_one_triplet_per_metric(self):
        result = run_scenario(ScenarioSpec(Scenario.SCAR), n=300, n_reps=2, seed=2)
        self.assertEqual([t.metric_name for t in result.triplets], list(ALL_METRICS))
        self.assertEqual(len(result.calibration[Estimator.WEIGHTED]), 5)

    def test_metric_subset(self):
        result = run_scenario(ScenarioSpec(Scenario.SCAR), n=300, n_reps=2, seed=2, metrics=[MetricName.AUROC])
        self.assertEqual([t.metric_name for t in result.triplets], [MetricName.AUROC])

    def test_select_hard_bias_and_recovery(self):
        result = run_scenario(ScenarioSpec(Scenario.SELECT_HARD), n=4000, n_reps=8, seed=3)
        auroc = result.triplet(MetricName.AUROC)
        sens = result.triplet(MetricName.SENSITIVITY)
        # exp(-distance) selection: observed AUROC about 0.75 against 0.835 actual
        self.assertLess(auroc.observed.mean, auroc.actual.mean - 0.06)
        self.assertLess(sens.observed.mean, sens.actual.mean - 0.04)
        self.assertAlmostEqual(sens.weighted.mean, sens.actual.mean, delta=0.03)
        self.assertAlmostEqual(auroc.weighted.mean, auroc.actual.mean, delta=0.03)

    def test_select_easy_bias_and_recovery(self):
        result = run_scenario(ScenarioSpec(Scenario.SELECT_EASY), n=4000, n_reps=8, seed=4)
        auroc = result.triplet(MetricName.AUROC)
        self.assertGreater(auroc.observed.mean, auroc.actual.mean + 0.04)
        self.assertAlmostEqual(auroc.weighted.mean, auroc.actual.mean, delta=0.03)

    def test_label_dependent_selection_keeps_auroc(self):
        result = run_scenario(ScenarioSpec(Scenario.SELECT_NEGATIVE), n=4000, n_reps=8, seed=5)
        auroc = result.triplet(MetricName.AUROC)
        ppv = result.triplet(MetricName.PPV)
        self.assertAlmostEqual(auroc.observed.mean, auroc.actual.mean, delta=0.015)
        self.assertLess(ppv.observed.mean, ppv.actual.mean - 0.05)
        self.assertAlmostEqual(ppv.weighted.mean, ppv.actual.mean, delta=0.03)

    def test_label_dependent_selection_shifts_calibration(self):
        below = run_scenario(ScenarioSpec(Scenario.SELECT_NEGATIVE), n=4000, n_reps=5, seed=7, metrics=())
        above = run_scenario(ScenarioSpec(Scenario.SELECT_POSITIVE), n=4000, n_reps=5, seed=8, metrics=())
        for result, sign in ((below, -1), (above, 1)):
            with self.subTest(result.spec.slug):
                observed = [b for b in result.calibration[Estimator.OBSERVED] if b.mean_pred is not None]
                self.assertEqual(len(observed), 5)
                for b in observed:
                    self.assertGreater(sign * (b.prevalence.mean - b.mean_pred), 0.0)
                weighted = [b for b in result.calibration[Estimator.WEIGHTED] if b.mean_pred is not None]
                gaps = [abs(b.prevalence.mean - b.mean_pred) for b in weighted]
                self.assertLess(sum(gaps) / len(gaps), 0.03)

    def test_worker_count_does_not_change_results(self):
        spec = ScenarioSpec(Scenario.SELECT_POSITIVE)
        serial = run_scenario(spec, n=400, n_reps=6, seed=9, workers=1)
        threaded = run_scenario(spec, n=400, n_reps=6, seed=9, workers=3)
        self.assertEqual(serial.triplets, threaded.triplets)
        self.assertEqual(serial.calibration, threaded.calibration)

    def test_degenerate_replicates_are_flagged(self):
        with self.assertLogs('experiments.runner', level='WARNING'):
            result = run_scenario(ScenarioSpec(Scenario.SCAR, pi1=0.2), n=4, n_reps=40, seed=6)
        self.assertIn(MetricName.AUROC, result.flagged_metrics)
        self.assertGreater(result.triplet(MetricName.AUROC).observed.n_undefined, 4)

    def test_preconditions(self):
        spec = ScenarioSpec(Scenario.SCAR)
        with self.assertRaises(InvalidParameterError):
            run_scenario(spec, n=1, n_reps=1)
        with self.assertRaises(InvalidParameterError):
            run_scenario(spec, n=10, n_reps=0)
        with self.assertRaises(InvalidParameterError):
            run_scenario(spec, n=10, n_reps=1, threshold=1.5)


class ReportTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.results = [
            run_scenario(ScenarioSpec(scenario), n=400, n_reps=3, seed=11) for scenario in reversed(list(Scenario))
        ]

    def test_grid_cardinality(self):
        report = table1_report(self.results)
        self.assertEqual([r.spec.scenario for r in report.results], list(Scenario))
        self.assertEqual(len(report.rows()), 6 * 5 * 3)
        lines = report.to_csv().splitlines()
        self.assertEqual(lines[0], ','.join(TABLE1_COLUMNS))
        self.assertEqual(len(lines), 91)

    def test_csv_is_deterministic(self):
        again = [run_scenario(ScenarioSpec(s), n=400, n_reps=3, seed=11) for s in Scenario]
        self.assertEqual(table1_report(self.results).to_csv(), table1_report(again).to_csv())

    def test_missing_scenario(self):
        with self.assertRaises(MissingScenarioError):
            table1_report(self.results[1:])

    def test_text_grid(self):
        text = table1_report(self.results).to_text()
        self.assertIn('Scenario 1 (scar)', text)
        self.assertIn('AUROC', text)
        self.assertIn('Weighted', text)

    def test_calibration_csv(self):
        lines = calibration_csv(self.results).splitlines()
        self.assertEqual(lines[0], ','.join(CALIBRATION_COLUMNS))
        self.assertEqual(len(lines), 1 + 5 * 3 * 5)

    def test_json_fields(self):
        data = json.loads(json.dumps(ScenarioResultSerializer(self.results[0]).data))
        self.assertEqual(data['spec']['scenario'], 'select_positive')
        self.assertEqual(len(data['triplets']), 6)
        self.assertEqual(set(data['calibration']), {'actual', 'observed', 'weighted'})
        self.assertEqual(
            set(data['triplets'][0]['actual']), {'mean', 'lo', 'hi', 'n_values', 'n_undefined'}
        )
