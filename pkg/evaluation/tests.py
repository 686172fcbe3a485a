import itertools

import numpy as np
from django.test import SimpleTestCase
from hypothesis import HealthCheck, assume, given, settings as hypothesis_settings, strategies as st
from sklearn.metrics import accuracy_score, average_precision_score, precision_score, recall_score, roc_auc_score

from .exceptions import (
    DegenerateCurveError,
    EmptyPopulationError,
    InvalidParameterError,
    PositivityViolation,
    UndefinedMetricError,
    UnlabeledSampleError,
)
from .metrics import (
    ALL_METRICS,
    MetricName,
    accuracy,
    calibration_curve,
    evaluate_metrics,
    ipw_weights,
    ppv,
    sensitivity,
    specificity,
    weighted_auroc,
    weighted_confusion,
    weighted_pr,
    weighted_roc,
)
from .types import NO_DATA, SampleBatch, WeightedConfusion, WeightedSample


def labeled(scores, labels, weights=None):
    return SampleBatch.from_arrays(scores, labels=labels, weights=weights)


def pairwise_auc(scores, labels, weights):
    """Weighted Mann-Whitney statistic, ties counted one half."""
    num = 0.0
    w_pos = w_neg = 0.0
    for s, y, w in zip(scores, labels, weights):
        if y == 1:
            w_pos += w
        else:
            w_neg += w
    for (si, yi, wi), (sj, yj, wj) in itertools.product(zip(scores, labels, weights), repeat=2):
        if yi == 1 and yj == 0:
            num += wi * wj * (1.0 if si > sj else 0.5 if si == sj else 0.0)
    return num / (w_pos * w_neg)


grid_scores = st.integers(min_value=0, max_value=20).map(lambda k: k / 20)

weighted_rows = st.lists(
    st.tuples(grid_scores, st.integers(0, 1), st.floats(min_value=0.05, max_value=20.0)),
    min_size=2,
    max_size=50,
)

integer_weighted_rows = st.lists(
    st.tuples(grid_scores, st.integers(0, 1), st.integers(min_value=1, max_value=4)),
    min_size=2,
    max_size=30,
)

property_settings = hypothesis_settings(deadline=None, suppress_health_check=[HealthCheck.too_slow])


class WeightedSampleTests(SimpleTestCase):
    def test_unselected_sample_cannot_carry_label(self):
        with self.assertRaises(InvalidParameterError):
            WeightedSample(score=0.3, label=1, selected=False, selection_prob=0.5)

    def test_selected_sample_needs_label(self):
        with self.assertRaises(InvalidParameterError):
            WeightedSample(score=0.3, label=None, selected=True)

    def test_score_out_of_range(self):
        with self.assertRaises(InvalidParameterError):
            WeightedSample(score=1.2, label=0)

    def test_selection_prob_range(self):
        for prob in (-0.1, 1.1):
            with self.assertRaises(InvalidParameterError):
                WeightedSample(score=0.3, label=0, selection_prob=prob)

    def test_zero_selection_prob_fails_at_weighting(self):
        samples = [
            WeightedSample(score=0.9, label=1, selection_prob=0.0),
            WeightedSample(score=0.2, label=0, selection_prob=0.5),
        ]
        with self.assertRaisesMessage(PositivityViolation, 'positivity violation'):
            ipw_weights(samples)
        self.assertEqual(len(ipw_weights(samples[1:])), 1)

    def test_batch_round_trip_preserves_samples(self):
        samples = [
            WeightedSample(0.9, 1),
            WeightedSample(0.2, None, selected=False, selection_prob=0.4),
            WeightedSample(0.5, 0, selection_prob=0.25, weight=4.0),
        ]
        self.assertEqual(list(SampleBatch.from_samples(samples)), samples)


class WeightedConfusionTests(SimpleTestCase):
    def test_enumerated_example(self):
        c = weighted_confusion(labeled([0.9, 0.8, 0.4, 0.2], [1, 1, 1, 0]), 0.5)
        self.assertEqual((c.wtp, c.wfn, c.wfp, c.wtn), (2.0, 1.0, 0.0, 1.0))

    def test_doubling_weights_doubles_cells(self):
        scores, labels = [0.9, 0.6, 0.5, 0.3, 0.1], [1, 0, 1, 0, 1]
        base = weighted_confusion(labeled(scores, labels), 0.5)
        doubled = weighted_confusion(labeled(scores, labels, weights=[2.0] * 5), 0.5)
        self.assertEqual(doubled, base.scaled(2.0))

    def test_single_sample_fills_one_cell(self):
        c = weighted_confusion([WeightedSample(0.7, 1, weight=3.0)], 0.5)
        self.assertEqual((c.wtp, c.wfp, c.wtn, c.wfn), (3.0, 0.0, 0.0, 0.0))

    def test_score_at_threshold_is_positive(self):
        c = weighted_confusion(labeled([0.5], [0]), 0.5)
        self.assertEqual(c.wfp, 1.0)

    def test_empty_population(self):
        with self.assertRaisesMessage(EmptyPopulationError, 'empty population'):
            weighted_confusion([], 0.5)

    def test_unlabeled_sample(self):
        samples = [WeightedSample(0.6, 1), WeightedSample(0.4, None, selected=False, selection_prob=0.5)]
        with self.assertRaisesMessage(UnlabeledSampleError, 'unlabeled sample in metric computation'):
            weighted_confusion(samples, 0.5)

    @property_settings
    @given(weighted_rows)
    def test_cells_conserve_total_weight(self, rows):
        scores, labels, weights = zip(*rows)
        c = weighted_confusion(labeled(scores, labels, weights), 0.5)
        self.assertAlmostEqual(c.total / sum(weights), 1.0, delta=1e-9)


class ConfusionRatioTests(SimpleTestCase):
    def test_ratios_from_enumerated_confusion(self):
        c = WeightedConfusion(wtp=2, wfp=0, wtn=1, wfn=1, threshold=0.5)
        self.assertAlmostEqual(sensitivity(c).value, 2 / 3)
        self.assertEqual(specificity(c).value, 1.0)
        self.assertEqual(ppv(c).value, 1.0)
        self.assertEqual(accuracy(c).value, 0.75)

    def test_perfect_classifier(self):
        c = WeightedConfusion(wtp=4, wfp=0, wtn=3, wfn=0, threshold=0.5)
        for fn in (sensitivity, specificity, ppv, accuracy):
            self.assertEqual(fn(c).value, 1.0)

    def test_zero_denominator_is_tagged_undefined(self):
        c = WeightedConfusion(wtp=0, wfp=0, wtn=5, wfn=2, threshold=0.5)
        value = ppv(c)
        self.assertFalse(value.is_defined)
        self.assertIn('no predicted positives', value.reason)
        with self.assertRaises(UndefinedMetricError):
            float(value)
        self.assertEqual(sensitivity(c).value, 0.0)


class WeightedRocTests(SimpleTestCase):
    def test_perfect_separation(self):
        self.assertEqual(weighted_roc(labeled([0.9, 0.1], [1, 0])).area, 1.0)

    def test_perfect_inversion(self):
        self.assertEqual(weighted_roc(labeled([0.1, 0.9], [1, 0])).area, 0.0)

    def test_single_class_is_degenerate(self):
        with self.assertRaisesMessage(DegenerateCurveError, 'degenerate ROC: one class absent'):
            weighted_roc(labeled([0.2, 0.7], [1, 1]))

    def test_ties_form_one_vertex(self):
        curve = weighted_roc(labeled([0.5, 0.5, 0.5, 0.1], [1, 0, 1, 0]))
        self.assertEqual(len(curve.points), 3)
        self.assertEqual(curve.points[1], (0.5, 1.0))

    @property_settings
    @given(weighted_rows)
    def test_curve_is_anchored_and_monotone(self, rows):
        scores, labels, weights = zip(*rows)
        assume(0 < sum(labels) < len(labels))
        curve = weighted_roc(labeled(scores, labels, weights))
        self.assertEqual(curve.points[0], (0.0, 0.0))
        self.assertEqual(curve.points[-1], (1.0, 1.0))
        self.assertTrue(np.all(np.diff(curve.xs) >= 0))
        self.assertTrue(np.all(np.diff(curve.ys) >= 0))

    @hypothesis_settings(property_settings, max_examples=300)
    @given(weighted_rows)
    def test_area_matches_pairwise_statistic(self, rows):
        scores, labels, weights = zip(*rows)
        assume(0 < sum(labels) < len(labels))
        area = weighted_roc(labeled(scores, labels, weights)).area
        self.assertAlmostEqual(area, pairwise_auc(scores, labels, weights), delta=1e-9)

    @property_settings
    @given(weighted_rows)
    def test_area_is_rank_invariant(self, rows):
        scores, labels, weights = zip(*rows)
        assume(0 < sum(labels) < len(labels))
        cubed = [s ** 3 for s in scores]
        self.assertAlmostEqual(
            weighted_auroc(labeled(scores, labels, weights)),
            weighted_auroc(labeled(cubed, labels, weights)),
            delta=1e-12,
        )

    def test_unit_weights_match_textbook_auc(self):
        rng = np.random.default_rng(7)
        scores = np.round(rng.random(500), 2)
        labels = (rng.random(500) < scores).astype(int)
        self.assertAlmostEqual(
            weighted_auroc(labeled(scores, labels)), roc_auc_score(labels, scores), places=12
        )


class WeightedPrTests(SimpleTestCase):
    def test_perfect_separation(self):
        self.assertEqual(weighted_pr(labeled([0.9, 0.1], [1, 0])).area, 1.0)

    def test_no_positives_is_degenerate(self):
        with self.assertRaisesMessage(DegenerateCurveError, 'degenerate PR: no positives'):
            weighted_pr(labeled([0.9, 0.1], [0, 0]))

    def test_points_span_recall_and_bound_precision(self):
        curve = weighted_pr(labeled([0.9, 0.7, 0.7, 0.4, 0.2], [1, 0, 1, 1, 0]))
        self.assertEqual(curve.points[0].x, 0.0)
        self.assertEqual(curve.points[-1].x, 1.0)
        self.assertTrue(all(0.0 <= p.y <= 1.0 for p in curve.points))

    def test_unit_weights_match_average_precision(self):
        rng = np.random.default_rng(11)
        scores = np.round(rng.random(400), 2)
        labels = (rng.random(400) < scores).astype(int)
        self.assertAlmostEqual(
            weighted_pr(labeled(scores, labels)).area,
            average_precision_score(labels, scores),
            places=12,
        )

    def test_weights_match_weighted_average_precision(self):
        rng = np.random.default_rng(5)
        scores = np.round(rng.random(300), 2)
        labels = (rng.random(300) < scores).astype(int)
        weights = rng.uniform(0.2, 5.0, 300)
        self.assertAlmostEqual(
            weighted_pr(labeled(scores, labels, weights)).area,
            average_precision_score(labels, scores, sample_weight=weights),
            places=10,
        )


class MetricPropertyTests(SimpleTestCase):
    @property_settings
    @given(integer_weighted_rows)
    def test_integer_weights_equal_replication(self, rows):
        scores, labels, weights = zip(*rows)
        assume(0 < sum(labels) < len(labels))
        replicated = [(s, y) for s, y, w in rows for _ in range(w)]
        rep_scores, rep_labels = zip(*replicated)

        weighted = evaluate_metrics(labeled(scores, labels, weights), ALL_METRICS, 0.5)
        expanded = evaluate_metrics(labeled(rep_scores, rep_labels), ALL_METRICS, 0.5)
        for name in ALL_METRICS:
            self.assertEqual(weighted[name].is_defined, expanded[name].is_defined)
            if weighted[name].is_defined:
                self.assertAlmostEqual(weighted[name].value, expanded[name].value, delta=1e-9)

    @property_settings
    @given(weighted_rows, st.floats(min_value=0.01, max_value=100.0))
    def test_constant_weight_invariance(self, rows, factor):
        scores, labels, weights = zip(*rows)
        assume(0 < sum(labels) < len(labels))
        base = evaluate_metrics(labeled(scores, labels, weights), ALL_METRICS, 0.5)
        scaled = evaluate_metrics(labeled(scores, labels, [w * factor for w in weights]), ALL_METRICS, 0.5)
        for name in ALL_METRICS:
            if base[name].is_defined:
                self.assertAlmostEqual(base[name].value, scaled[name].value, delta=1e-9)

    def test_unit_weights_match_textbook_threshold_metrics(self):
        rng = np.random.default_rng(3)
        scores = rng.random(1000)
        labels = (rng.random(1000) < scores).astype(int)
        predicted = (scores >= 0.5).astype(int)
        values = evaluate_metrics(labeled(scores, labels), ALL_METRICS, 0.5)
        self.assertAlmostEqual(values[MetricName.SENSITIVITY].value, recall_score(labels, predicted), places=12)
        self.assertAlmostEqual(values[MetricName.SPECIFICITY].value, recall_score(1 - labels, 1 - predicted), places=12)
        self.assertAlmostEqual(values[MetricName.PPV].value, precision_score(labels, predicted), places=12)
        self.assertAlmostEqual(values[MetricName.ACCURACY].value, accuracy_score(labels, predicted), places=12)

    def test_single_class_curve_metrics_are_undefined(self):
        values = evaluate_metrics(labeled([0.2, 0.8], [0, 0]), ALL_METRICS, 0.5)
        self.assertFalse(values[MetricName.AUROC].is_defined)
        self.assertFalse(values[MetricName.AUPRC].is_defined)
        self.assertFalse(values[MetricName.SENSITIVITY].is_defined)
        self.assertEqual(values[MetricName.SPECIFICITY].value, 0.5)


class CalibrationCurveTests(SimpleTestCase):
    def test_rejects_bad_bin_count(self):
        with self.assertRaises(InvalidParameterError):
            calibration_curve(labeled([0.5], [1]), 0)

    def test_empty_bins_carry_no_data_marker(self):
        curve = calibration_curve(labeled([0.05, 0.15, 0.95], [0, 1, 1]), 5)
        self.assertEqual(len(curve.points), 5)
        self.assertEqual(curve.points[1], NO_DATA)
        self.assertEqual(curve.points[2], NO_DATA)
        self.assertEqual(curve.bin_counts, (2.0, 0.0, 0.0, 0.0, 1.0))
        self.assertAlmostEqual(curve.points[0].x, 0.1)
        self.assertEqual(curve.points[0].y, 0.5)

    def test_last_bin_is_right_closed(self):
        curve = calibration_curve(labeled([1.0, 0.8], [1, 0]), 5)
        self.assertEqual(curve.bins[4].weight_mass, 2.0)

    def test_bin_edges_are_left_closed(self):
        curve = calibration_curve(labeled([0.2, 0.4], [1, 0]), 5)
        self.assertEqual(curve.bin_counts, (0.0, 1.0, 1.0, 0.0, 0.0))

    def test_calibrated_scores_lie_on_diagonal(self):
        rng = np.random.default_rng(2)
        scores = rng.random(50_000)
        labels = (rng.random(50_000) < scores).astype(int)
        curve = calibration_curve(labeled(scores, labels), 5)
        for point in curve.points:
            self.assertAlmostEqual(point.x, point.y, delta=0.02)

    def test_weighted_prevalence(self):
        curve = calibration_curve(labeled([0.1, 0.1], [1, 0], weights=[3.0, 1.0]), 1)
        self.assertEqual(curve.points[0].y, 0.75)


class IpwWeightsTests(SimpleTestCase):
    def population(self, probs):
        rng = np.random.default_rng(13)
        scores = rng.random(len(probs))
        labels = (rng.random(len(probs)) < scores).astype(int)
        return SampleBatch.from_arrays(scores, labels=labels, selection_probs=probs)

    def test_unit_probabilities_give_unit_weights(self):
        batch = self.population([1.0] * 200)
        weighted = ipw_weights(batch)
        self.assertTrue(np.all(weighted.weights == 1.0))
        self.assertEqual(evaluate_metrics(weighted), evaluate_metrics(batch))

    def test_constant_probability_cancels(self):
        batch = self.population([0.5] * 200)
        weighted = ipw_weights(batch)
        self.assertTrue(np.all(weighted.weights == 2.0))
        plain = evaluate_metrics(batch)
        for name, value in evaluate_metrics(weighted).items():
            self.assertAlmostEqual(value.value, plain[name].value, delta=1e-12)

    def test_only_selected_samples_are_kept(self):
        batch = SampleBatch.from_arrays(
            [0.9, 0.4, 0.3], labels=[1, 0, 0], selected=[True, False, True],
            selection_probs=[0.25, 0.5, 0.8],
        )
        weighted = ipw_weights(batch)
        self.assertEqual(len(weighted), 2)
        np.testing.assert_allclose(weighted.weights * weighted.selection_probs, 1.0, atol=1e-12)

    def test_zero_probability_on_selected_sample(self):
        batch = SampleBatch.from_arrays([0.9, 0.4], labels=[1, 0], selection_probs=[0.0, 0.5])
        with self.assertRaisesMessage(PositivityViolation, 'positivity violation'):
            ipw_weights(batch)

    def test_weighting_recovers_full_population_auroc(self):
        rng = np.random.default_rng(17)
        scores = rng.random(20_000)
        labels = (rng.random(20_000) < scores).astype(int)
        probs = np.where(labels == 1, 0.2, 0.9) * (0.5 + scores / 2)
        selected = rng.random(20_000) < probs
        full = weighted_auroc(labeled(scores, labels))
        batch = SampleBatch.from_arrays(scores, labels=labels, selected=selected, selection_probs=probs)
        self.assertAlmostEqual(weighted_auroc(ipw_weights(batch)), full, delta=0.02)
