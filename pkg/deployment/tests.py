import json
import math
import os
import tempfile
from functools import partial

import numpy as np
from django.test import SimpleTestCase
from scipy.stats import norm
from sklearn.metrics import roc_auc_score

from evaluation.exceptions import InvalidParameterError, PositivityViolation
from evaluation.metrics import calibration_curve

from .exceptions import PopulationFileError
from .populations import (
    CLINICAL_PREVALENCES,
    Provenance,
    ScoredPopulation,
    dgp_population,
    load_population_csv,
    synthetic_clinical_population,
)
from .serializers import SweepReportSerializer
from .simulation import DeploymentConfig, alert_eligible, alert_eligible_mask, simulate_deployment, summarize_replicates
from .sweeps import (
    SWEEP_COLUMNS,
    SweepParam,
    default_pt_grid,
    default_withhold_grid,
    sweep_csv,
    sweep_p_t,
    sweep_p_withhold,
)


class AlertEligibleTests(SimpleTestCase):
    def test_examples(self):
        self.assertTrue(alert_eligible(0.95, 0.9))
        self.assertTrue(alert_eligible(0.05, 0.9))
        self.assertFalse(alert_eligible(0.5, 0.9))
        self.assertFalse(alert_eligible(0.5, 0.51))

    def test_threshold_range(self):
        for p_t in (0.5, 1.0, 0.2):
            with self.assertRaises(InvalidParameterError):
                alert_eligible(0.9, p_t)

    def test_mask_matches_scalar(self):
        scores = np.linspace(0, 1, 101)
        expected = [alert_eligible(s, 0.8) for s in scores]
        self.assertEqual(alert_eligible_mask(scores, 0.8).tolist(), expected)


class DeploymentConfigTests(SimpleTestCase):
    def test_valid(self):
        cfg = DeploymentConfig(0.9, 0.05, n_reps=10, seed=1)
        self.assertFalse(cfg.resample_population)

    def test_rejects_bad_parameters(self):
        for kwargs in ({'p_t': 0.5, 'p_withhold': 0.1}, {'p_t': 0.9, 'p_withhold': 1.5},
                       {'p_t': 0.9, 'p_withhold': 0.1, 'n_reps': 0}):
            with self.assertRaises(InvalidParameterError):
                DeploymentConfig(**kwargs)


class SyntheticClinicalPopulationTests(SimpleTestCase):
    def test_realized_prevalence(self):
        population = synthetic_clinical_population(10_000, CLINICAL_PREVALENCES[2], 2.0, seed=1)
        self.assertTrue(0.26 <= population.prevalence <= 0.28)
        self.assertIs(population.provenance, Provenance.SYNTHETIC_CLINICAL)

    def test_deterministic(self):
        a = synthetic_clinical_population(500, 0.57, 1.5, seed=2)
        b = synthetic_clinical_population(500, 0.57, 1.5, seed=2)
        np.testing.assert_array_equal(a.scores, b.scores)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_auroc_follows_separation(self):
        population = synthetic_clinical_population(20_000, 0.57, 2.0, seed=3)
        self.assertAlmostEqual(
            roc_auc_score(population.labels, population.scores), norm.cdf(2.0 / math.sqrt(2)), delta=0.01
        )
        weak = synthetic_clinical_population(20_000, 0.57, 1e-3, seed=3)
        self.assertAlmostEqual(roc_auc_score(weak.labels, weak.scores), 0.5, delta=0.02)

    def test_calibrated(self):
        population = synthetic_clinical_population(50_000, 0.79, 1.5, seed=4)
        curve = calibration_curve(population.sorted_batch, 5)
        for point in curve.points:
            if point.has_data:
                self.assertAlmostEqual(point.x, point.y, delta=0.03)

    def test_parameter_checks(self):
        with self.assertRaises(InvalidParameterError):
            synthetic_clinical_population(100, 1.0, 1.0, seed=0)
        with self.assertRaises(InvalidParameterError):
            synthetic_clinical_population(100, 0.5, 0.0, seed=0)
        with self.assertRaises(InvalidParameterError):
            synthetic_clinical_population(1, 0.5, 1.0, seed=0)


class DgpPopulationTests(SimpleTestCase):
    def test_full_population(self):
        population = dgp_population(5_000, seed=5)
        self.assertEqual(len(population), 5_000)
        self.assertAlmostEqual(population.prevalence, 0.5, delta=0.03)
        self.assertIs(population.provenance, Provenance.SYNTHETIC_DGP)


class LoadPopulationCsvTests(SimpleTestCase):
    def write(self, text):
        handle, path = tempfile.mkstemp(suffix='.csv')
        with os.fdopen(handle, 'w') as f:
            f.write(text)
        self.addCleanup(os.remove, path)
        return path

    def test_valid_file(self):
        rows = ''.join(f'{i / 100},{i % 2}\n' for i in range(100))
        population = load_population_csv(self.write('score,label\n' + rows))
        self.assertEqual(len(population), 100)
        self.assertEqual(population.prevalence, 0.5)
        self.assertIs(population.provenance, Provenance.EXTERNAL_FILE)

    def test_two_rows_warn(self):
        path = self.write('score,label\n0.9,1\n0.2,0\n')
        with self.assertLogs('deployment.populations', level='WARNING'):
            population = load_population_csv(path)
        self.assertTrue(population.has_both_classes)

    def test_bad_score_names_line(self):
        path = self.write('score,label\n0.9,1\nhigh,0\n')
        with self.assertRaisesMessage(PopulationFileError, 'line 3'):
            load_population_csv(path)

    def test_score_out_of_range(self):
        path = self.write('score,label\n0.9,1\n0.2,0\n1.2,1\n')
        with self.assertRaisesMessage(PopulationFileError, 'line 4'):
            load_population_csv(path)

    def test_bad_label(self):
        path = self.write('score,label\n0.9,yes\n')
        with self.assertRaisesMessage(PopulationFileError, 'line 2'):
            load_population_csv(path)

    def test_missing_column(self):
        with self.assertRaisesMessage(PopulationFileError, 'line 1'):
            load_population_csv(self.write('prob,label\n0.9,1\n'))

    def test_missing_file(self):
        with self.assertRaises(PopulationFileError):
            load_population_csv('/nonexistent/scores.csv')


class SimulateDeploymentTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.population = synthetic_clinical_population(4_000, 0.57, 2.0, seed=7)

    def test_no_withholding_ablation(self):
        replicates = simulate_deployment(self.population, DeploymentConfig(0.9, 1.0, n_reps=3, seed=1))
        for r in replicates:
            self.assertEqual(r.actual, r.observed)
            self.assertEqual(r.actual, r.weighted)
            self.assertEqual(r.observed_fraction, 1.0)

    def test_no_eligible_examples(self):
        self.assertLess(self.population.scores.max(), 1 - 1e-7)
        self.assertGreater(self.population.scores.min(), 1e-7)
        replicates = simulate_deployment(self.population, DeploymentConfig(1 - 1e-7, 0.05, n_reps=2, seed=1))
        for r in replicates:
            self.assertEqual(r.eligible_fraction, 0.0)
            self.assertEqual(r.actual, r.observed)
            self.assertEqual(r.actual, r.weighted)

    def test_positivity_violation(self):
        with self.assertRaisesMessage(PositivityViolation, 'eligible labels never observed'):
            simulate_deployment(self.population, DeploymentConfig(0.9, 0.0, n_reps=1, seed=1))

    def test_single_class_population(self):
        population = ScoredPopulation(np.array([0.2, 0.9]), np.array([1, 1]), Provenance.EXTERNAL_FILE)
        with self.assertRaises(InvalidParameterError):
            simulate_deployment(population, DeploymentConfig(0.9, 0.5, n_reps=1))

    def test_feedback_bias_and_recovery(self):
        summary = summarize_replicates(
            simulate_deployment(self.population, DeploymentConfig(0.9, 0.05, n_reps=40, seed=2))
        )
        self.assertLess(summary.observed.mean, summary.actual.mean - 0.05)
        self.assertAlmostEqual(summary.weighted.mean, summary.actual.mean, delta=0.02)

    def test_eligible_observed_fraction_matches_p_withhold(self):
        replicates = simulate_deployment(self.population, DeploymentConfig(0.8, 0.5, n_reps=20, seed=3))
        fractions = [r.eligible_observed_fraction for r in replicates]
        eligible = int(alert_eligible_mask(self.population.scores, 0.8).sum())
        standard_error = math.sqrt(0.25 / (eligible * len(fractions)))
        self.assertAlmostEqual(float(np.mean(fractions)), 0.5, delta=3 * standard_error)

    def test_worker_count_does_not_change_results(self):
        cfg = DeploymentConfig(0.85, 0.2, n_reps=8, seed=4)
        self.assertEqual(
            simulate_deployment(self.population, cfg, workers=1),
            simulate_deployment(self.population, cfg, workers=4),
        )

    def test_resample_population(self):
        factory = partial(synthetic_clinical_population, 1_000, 0.57, 2.0)
        cfg = DeploymentConfig(0.9, 0.5, n_reps=4, seed=5, resample_population=True)
        replicates = simulate_deployment(self.population, cfg, population_factory=factory)
        self.assertEqual(len({r.actual for r in replicates}), 4)
        with self.assertRaises(InvalidParameterError):
            simulate_deployment(self.population, cfg)


class SweepTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.population = synthetic_clinical_population(2_000, 0.57, 2.0, seed=8)

    def test_default_grids(self):
        pt = default_pt_grid()
        self.assertEqual((len(pt), pt[0], pt[-1]), (25, 0.99, 0.51))
        withhold = default_withhold_grid()
        self.assertEqual(len(withhold), 25)
        self.assertEqual(withhold[0], 0.99)
        self.assertAlmostEqual(withhold[-1], 0.01, places=12)
        self.assertTrue(all(a > b for a, b in zip(withhold, withhold[1:])))

    def test_grid_validation(self):
        with self.assertRaises(InvalidParameterError):
            sweep_p_t(self.population, [0.7, 0.9], n_reps=1)
        with self.assertRaises(InvalidParameterError):
            sweep_p_t(self.population, [0.5], n_reps=1)
        with self.assertRaises(InvalidParameterError):
            sweep_p_withhold(self.population, [0.0], n_reps=1)

    def test_no_ablation_rows_coincide(self):
        rows = sweep_p_t(self.population, [0.95, 0.9, 0.7], p_withhold=1.0, n_reps=2, seed=1)
        for row in rows:
            self.assertIs(row.swept_param, SweepParam.P_T)
            self.assertEqual(row.actual.mean, row.observed.mean)
            self.assertEqual(row.actual.mean, row.weighted.mean)

    def test_observed_fraction_falls_with_p_withhold(self):
        rows = sweep_p_withhold(self.population, [0.9, 0.5, 0.1], p_t=0.9, n_reps=5, seed=2)
        fractions = [row.mean_observed_fraction for row in rows]
        self.assertTrue(fractions[0] > fractions[1] > fractions[2])

    def test_csv_and_json(self):
        pt_rows = sweep_p_t(self.population, [0.95, 0.8], n_reps=3, seed=3)
        withhold_rows = sweep_p_withhold(self.population, [0.5], n_reps=3, seed=3)
        lines = sweep_csv(pt_rows).splitlines()
        self.assertEqual(lines[0], ','.join(SWEEP_COLUMNS))
        self.assertEqual(len(lines), 1 + 2 * 3)
        self.assertEqual(sweep_csv(pt_rows), sweep_csv(sweep_p_t(self.population, [0.95, 0.8], n_reps=3, seed=3)))

        report = {'population': self.population, 'p_t_sweep': pt_rows, 'p_withhold_sweep': withhold_rows}
        data = json.loads(json.dumps(SweepReportSerializer(report).data))
        self.assertEqual(data['population']['provenance'], 'clinical')
        self.assertEqual(data['population']['size'], 2_000)
        self.assertEqual([r['param_value'] for r in data['p_t_sweep']], [0.95, 0.8])
        self.assertEqual(data['p_withhold_sweep'][0]['swept_param'], 'p_withhold')


class FeedbackLoopShapeTests(SimpleTestCase):
    """Alert feedback on a well separated clinical population, p_withhold = 0.05."""
    pt_grid = [0.99, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.6, 0.51]

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.population = synthetic_clinical_population(10_000, 0.57, 2.0, seed=7)
        cls.rows = sweep_p_t(cls.population, cls.pt_grid, p_withhold=0.05, n_reps=10, seed=7)

    def test_actual_auroc_is_high(self):
        self.assertGreaterEqual(self.rows[0].actual.mean, 0.85)

    def test_observed_curve_dips_in_the_interior(self):
        observed = [row.observed.mean for row in self.rows]
        trough = min(observed[1:-1])
        self.assertLessEqual(trough, observed[0] - 0.05)
        self.assertLessEqual(trough, observed[-1] - 0.05)

    def test_weighted_tracks_actual_everywhere(self):
        for row in self.rows:
            with self.subTest(p_t=row.param_value):
                self.assertAlmostEqual(row.weighted.mean, row.actual.mean, delta=0.02)

    def test_observed_undershoots_by_at_least_fifteen_points(self):
        gaps = [row.actual.mean - row.observed.mean for row in self.rows]
        self.assertGreaterEqual(max(gaps), 0.15)

    def test_rare_withholding_widens_weighted_interval(self):
        rows = sweep_p_withhold(self.population, [0.5, 0.01], p_t=0.9, n_reps=30, seed=7)
        wide, narrow = rows[1].weighted, rows[0].weighted
        self.assertGreater(wide.hi - wide.lo, narrow.hi - narrow.lo)
        self.assertAlmostEqual(wide.mean, rows[1].actual.mean, delta=0.03)
