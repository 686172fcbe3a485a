import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import HealthCheck, given, settings as hypothesis_settings, strategies as st
from scipy.stats import chisquare

from evaluation.exceptions import InvalidParameterError
from evaluation.metrics import calibration_curve

from .dgp import (
    DeltaMode,
    DgpParams,
    Scenario,
    ScenarioSpec,
    boundary_distance,
    sample_dataset,
    selection_probability,
    sigmoid,
    support_delta,
)
from .seeding import derive_seed

property_settings = hypothesis_settings(deadline=None, suppress_health_check=[HealthCheck.too_slow])


class SigmoidTests(SimpleTestCase):
    def test_symmetry_point(self):
        self.assertEqual(sigmoid(0.0), 0.5)

    @property_settings
    @given(st.floats(min_value=-700, max_value=700))
    def test_complements_sum_to_one(self, z):
        self.assertAlmostEqual(sigmoid(z) + sigmoid(-z), 1.0, delta=1e-15)

    def test_closed_form(self):
        self.assertAlmostEqual(sigmoid(4.0), 1 / (1 + math.exp(-4)), places=15)
        self.assertAlmostEqual(sigmoid(4.0), 0.98201, places=5)

    def test_saturates_without_error(self):
        self.assertLess(sigmoid(-1e4), 1e-300)
        self.assertEqual(sigmoid(1e4), 1.0)


class BoundaryDistanceTests(SimpleTestCase):
    def test_point_on_boundary(self):
        self.assertEqual(boundary_distance(0.0, 0.0, DgpParams()), 0.0)

    def test_closed_form_distances(self):
        self.assertAlmostEqual(boundary_distance(1.0, 1.0, DgpParams()), math.sqrt(2), places=12)
        self.assertAlmostEqual(boundary_distance(2.0, 2.0, DgpParams()), 2 * math.sqrt(2), places=12)

    def test_support_supremum(self):
        self.assertAlmostEqual(support_delta(DgpParams()), 2 * math.sqrt(2), places=12)

    def test_zero_weight_vector(self):
        with self.assertRaises(InvalidParameterError):
            boundary_distance(1.0, 1.0, DgpParams(omega1=0.0, omega2=0.0))


class ScenarioSpecTests(SimpleTestCase):
    def test_defaults(self):
        self.assertEqual(ScenarioSpec(Scenario.SCAR).pi1, 0.5)
        negative = ScenarioSpec(Scenario.SELECT_NEGATIVE)
        self.assertEqual((negative.pi1, negative.pi2), (0.5, 1.0))
        positive = ScenarioSpec(Scenario.SELECT_POSITIVE)
        self.assertEqual((positive.pi1, positive.pi2), (1.0, 0.5))

    def test_feature_dependent_scenarios_reject_pi(self):
        with self.assertRaises(InvalidParameterError):
            ScenarioSpec(Scenario.SELECT_HARD, pi1=0.3)

    def test_scar_rejects_pi2(self):
        with self.assertRaises(InvalidParameterError):
            ScenarioSpec(Scenario.SCAR, pi2=0.3)

    def test_empty_support(self):
        with self.assertRaises(InvalidParameterError):
            DgpParams(alpha=-3.0, beta=2.0)

    def test_support_must_straddle_boundary(self):
        spec = ScenarioSpec(Scenario.SCAR, dgp=DgpParams(gamma=10.0))
        with self.assertRaises(InvalidParameterError):
            sample_dataset(spec, 10, seed=0)


class SelectionProbabilityTests(SimpleTestCase):
    def test_select_hard_on_boundary(self):
        self.assertEqual(selection_probability(0.0, 0.0, 1, ScenarioSpec(Scenario.SELECT_HARD)), 1.0)

    def test_select_easy_at_support_corner(self):
        self.assertEqual(selection_probability(2.0, 2.0, 0, ScenarioSpec(Scenario.SELECT_EASY)), 1.0)

    def test_select_easy_outside_support(self):
        with self.assertRaises(InvalidParameterError):
            selection_probability(3.0, 2.0, 0, ScenarioSpec(Scenario.SELECT_EASY))

    def test_select_negative(self):
        spec = ScenarioSpec(Scenario.SELECT_NEGATIVE)
        self.assertEqual(selection_probability(0.5, 0.5, 0, spec), 1.0)
        self.assertEqual(selection_probability(0.5, 0.5, 1, spec), 0.5)

    def test_scar_is_constant(self):
        spec = ScenarioSpec(Scenario.SCAR, pi1=0.3)
        self.assertEqual(selection_probability(-1.9, 1.2, 1, spec), 0.3)

    @property_settings
    @given(
        st.floats(min_value=-2, max_value=2),
        st.floats(min_value=-2, max_value=2),
        st.floats(min_value=-2, max_value=2),
        st.floats(min_value=-2, max_value=2),
    )
    def test_hard_and_easy_are_complementary(self, a1, a2, b1, b2):
        dgp = DgpParams()
        hard, easy = ScenarioSpec(Scenario.SELECT_HARD), ScenarioSpec(Scenario.SELECT_EASY)
        if boundary_distance(a1, a2, dgp) < boundary_distance(b1, b2, dgp):
            self.assertGreaterEqual(selection_probability(a1, a2, 0, hard), selection_probability(b1, b2, 0, hard))
            self.assertLessEqual(selection_probability(a1, a2, 0, easy), selection_probability(b1, b2, 0, easy))
        for x1, x2 in ((a1, a2), (b1, b2)):
            for spec in (hard, easy):
                self.assertTrue(0.0 < selection_probability(x1, x2, 0, spec) <= 1.0)


class SampleDatasetTests(SimpleTestCase):
    def test_same_seed_same_dataset(self):
        spec = ScenarioSpec(Scenario.SELECT_HARD)
        first, second = sample_dataset(spec, 500, seed=3), sample_dataset(spec, 500, seed=3)
        for column in ('x1', 'x2', 'y', 'scores', 'selection_probs', 'selected'):
            np.testing.assert_array_equal(getattr(first, column), getattr(second, column))

    def test_distinct_seeds_differ(self):
        spec = ScenarioSpec(Scenario.SCAR)
        self.assertFalse(np.array_equal(sample_dataset(spec, 100, 1).x1, sample_dataset(spec, 100, 2).x1))

    def test_rejects_empty_sample(self):
        with self.assertRaises(InvalidParameterError):
            sample_dataset(ScenarioSpec(Scenario.SCAR), 0, seed=1)

    def test_examples_are_consistent(self):
        spec = ScenarioSpec(Scenario.SELECT_POSITIVE)
        for example in list(sample_dataset(spec, 50, seed=8)):
            self.assertAlmostEqual(example.score, sigmoid(example.x1 + example.x2), places=15)
            self.assertAlmostEqual(
                example.selection_prob, selection_probability(example.x1, example.x2, example.y, spec), places=15
            )
            self.assertTrue(-2.0 <= example.x1 <= 2.0 and -2.0 <= example.x2 <= 2.0)

    def test_balanced_prevalence(self):
        for scenario in Scenario:
            dataset = sample_dataset(ScenarioSpec(scenario), 10_000, seed=scenario.number)
            self.assertAlmostEqual(dataset.y.mean(), 0.5, delta=0.02)

    def test_scar_observed_fraction(self):
        dataset = sample_dataset(ScenarioSpec(Scenario.SCAR), 10_000, seed=21)
        self.assertAlmostEqual(dataset.observed_fraction, 0.5, delta=0.02)

    def test_sample_delta_mode(self):
        spec = ScenarioSpec(Scenario.SELECT_EASY, delta_mode=DeltaMode.SAMPLE)
        dataset = sample_dataset(spec, 2_000, seed=4)
        self.assertAlmostEqual(dataset.selection_probs.max(), 1.0, places=12)

    def test_selection_frequencies_match_probabilities(self):
        dataset = sample_dataset(ScenarioSpec(Scenario.SELECT_HARD), 10_000, seed=99)
        edges = np.quantile(dataset.selection_probs, np.linspace(0, 1, 11))
        index = np.clip(np.searchsorted(edges, dataset.selection_probs, side='right') - 1, 0, 9)
        observed = np.bincount(index, weights=dataset.selected, minlength=10)
        expected = np.bincount(index, weights=dataset.selection_probs, minlength=10)
        counts = np.bincount(index, minlength=10)
        # two-cell table per bin: selected vs not selected
        stat_obs = np.concatenate([observed, counts - observed])
        stat_exp = np.concatenate([expected, counts - expected])
        self.assertGreater(chisquare(stat_obs, stat_exp, ddof=10).pvalue, 0.001)

    def test_full_population_is_calibrated(self):
        dataset = sample_dataset(ScenarioSpec(Scenario.SCAR), 50_000, seed=5)
        for point in calibration_curve(dataset.full_population(), 5).points:
            self.assertAlmostEqual(point.x, point.y, delta=0.03)

    def test_population_views(self):
        dataset = sample_dataset(ScenarioSpec(Scenario.SELECT_NEGATIVE), 1_000, seed=6)
        self.assertEqual(len(dataset.full_population()), 1_000)
        observed = dataset.observed_population()
        weighted = dataset.weighted_population()
        self.assertEqual(len(observed), int(dataset.selected.sum()))
        self.assertTrue(np.all(observed.weights == 1.0))
        np.testing.assert_allclose(weighted.weights * weighted.selection_probs, 1.0, atol=1e-12)


class SeedDerivationTests(SimpleTestCase):
    def test_children_depend_only_on_keys(self):
        a = derive_seed(7, 1, 3).generate_state(4)
        b = derive_seed(7, 1, 3).generate_state(4)
        c = derive_seed(7, 1, 4).generate_state(4)
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, c))

    def test_negative_seed(self):
        with self.assertRaises(InvalidParameterError):
            derive_seed(-1)
