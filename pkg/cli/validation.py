"""
Self-test harness behind the validate command.

Four properties are checked on small random instances:

    pairwise_auroc      weighted AUROC equals the weighted Mann-Whitney
                        statistic (ties count one half)
    replication         integer inverse-probability weights give the same
                        six metrics as replicating each example that many
                        times with unit weight
    unit_weight         unit-weight metrics equal the scikit-learn ones
    selection_prob      simulated selection frequencies agree with the
                        stated selection probabilities, and IPW weights
                        invert them

The weights-not-inverted fault replaces the IPW step with one that
weights by p instead of 1/p; the harness must then report failures.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.stats import chi2
from sklearn.metrics import accuracy_score, average_precision_score, precision_score, recall_score, roc_auc_score

from evaluation.metrics import ALL_METRICS, MetricName, evaluate_metrics, ipw_weights, weighted_auroc
from evaluation.types import SampleBatch
from synthetic.dgp import Scenario, ScenarioSpec, sample_dataset
from synthetic.seeding import STREAM_VALIDATION, derive_seed, make_rng

from .serializers import FAULT_NONE, FAULT_WEIGHTS_NOT_INVERTED

logger = logging.getLogger(__name__)

ORACLE_TOLERANCE = 1e-9
SKLEARN_TOLERANCE = 1e-12
CONSISTENCY_ALPHA = 0.001
WEIGHT_IDENTITY_TOLERANCE = 1e-12


@dataclass
class PropertyResult:
    name: str
    passed: bool
    checked: int
    detail: str = ''
    counterexample: Optional[Dict] = field(default=None)


def _faulty_ipw(batch: SampleBatch) -> SampleBatch:
    observed = batch.subset(batch.selected)
    return observed.with_weights(observed.selection_probs)


def ipw_step(fault: str) -> Callable[[SampleBatch], SampleBatch]:
    return _faulty_ipw if fault == FAULT_WEIGHTS_NOT_INVERTED else ipw_weights


def pairwise_auroc(scores, labels, weights) -> float:
    pos, neg = labels == 1, labels == 0
    diff = scores[pos][:, None] - scores[neg][None, :]
    wins = (diff > 0) + 0.5 * (diff == 0)
    return float(weights[pos] @ wins @ weights[neg] / (weights[pos].sum() * weights[neg].sum()))


def _random_instance(rng: np.random.Generator, max_n: int = 50):
    n = int(rng.integers(2, max_n + 1))
    scores = rng.integers(0, 21, n) / 20
    labels = rng.integers(0, 2, n)
    labels[:2] = (1, 0)
    return scores, labels


def _instance_payload(scores, labels, **extra) -> Dict:
    payload = {'scores': [float(s) for s in scores], 'labels': [int(y) for y in labels]}
    payload.update(extra)
    return payload


def check_pairwise_auroc(seed: int, instances: int, fault: str = FAULT_NONE) -> PropertyResult:
    ipw = ipw_step(fault)
    for i in range(instances):
        rng = make_rng(derive_seed(seed, STREAM_VALIDATION, 1, i))
        scores, labels = _random_instance(rng)
        probs = rng.uniform(0.05, 1.0, len(scores))
        batch = SampleBatch.from_arrays(scores, labels=labels, selection_probs=probs)
        actual = weighted_auroc(ipw(batch))
        expected = pairwise_auroc(scores, labels, 1.0 / probs)
        if abs(actual - expected) > ORACLE_TOLERANCE:
            return PropertyResult(
                'pairwise_auroc', False, i + 1,
                f'instance {i}: weighted AUROC {actual!r} != pairwise statistic {expected!r}',
                _instance_payload(scores, labels, selection_probs=[float(p) for p in probs],
                                  expected=expected, actual=actual),
            )
    return PropertyResult('pairwise_auroc', True, instances)


def _same_metric(a: Optional[float], b: Optional[float], tolerance: float) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return abs(a - b) <= tolerance


def check_replication(seed: int, instances: int, fault: str = FAULT_NONE) -> PropertyResult:
    ipw = ipw_step(fault)
    for i in range(instances):
        rng = make_rng(derive_seed(seed, STREAM_VALIDATION, 2, i))
        scores, labels = _random_instance(rng, max_n=30)
        copies = rng.integers(1, 5, len(scores))
        batch = SampleBatch.from_arrays(scores, labels=labels, selection_probs=1.0 / copies)
        replicated = SampleBatch.from_arrays(np.repeat(scores, copies), labels=np.repeat(labels, copies))

        weighted = evaluate_metrics(ipw(batch), ALL_METRICS)
        expanded = evaluate_metrics(replicated, ALL_METRICS)
        for name in ALL_METRICS:
            if not _same_metric(weighted[name].value, expanded[name].value, ORACLE_TOLERANCE):
                return PropertyResult(
                    'replication', False, i + 1,
                    f'instance {i}: {name.value} weighted {weighted[name].value!r} '
                    f'!= replicated {expanded[name].value!r}',
                    _instance_payload(scores, labels, copies=[int(c) for c in copies], metric=name.value,
                                      expected=expanded[name].value, actual=weighted[name].value),
                )
    return PropertyResult('replication', True, instances)


def _sklearn_metrics(scores, labels, threshold: float) -> Dict[MetricName, Optional[float]]:
    predicted = (scores >= threshold).astype(int)
    reference = {
        MetricName.SENSITIVITY: recall_score(labels, predicted, zero_division=0),
        MetricName.SPECIFICITY: recall_score(labels, predicted, pos_label=0, zero_division=0),
        MetricName.PPV: precision_score(labels, predicted, zero_division=0) if predicted.any() else None,
        MetricName.ACCURACY: accuracy_score(labels, predicted),
        MetricName.AUROC: roc_auc_score(labels, scores),
        MetricName.AUPRC: average_precision_score(labels, scores),
    }
    return {name: None if value is None else float(value) for name, value in reference.items()}


def check_unit_weight(seed: int, instances: int, threshold: float = 0.5) -> PropertyResult:
    for i in range(instances):
        rng = make_rng(derive_seed(seed, STREAM_VALIDATION, 3, i))
        scores, labels = _random_instance(rng)
        ours = evaluate_metrics(SampleBatch.from_arrays(scores, labels=labels), ALL_METRICS, threshold)
        reference = _sklearn_metrics(scores, labels, threshold)
        for name in ALL_METRICS:
            if not _same_metric(ours[name].value, reference[name], SKLEARN_TOLERANCE):
                return PropertyResult(
                    'unit_weight', False, i + 1,
                    f'instance {i}: {name.value} {ours[name].value!r} != scikit-learn {reference[name]!r}',
                    _instance_payload(scores, labels, metric=name.value,
                                      expected=reference[name], actual=ours[name].value),
                )
    return PropertyResult('unit_weight', True, instances)


def selection_consistency_pvalue(selected: np.ndarray, probs: np.ndarray, n_bins: int = 10) -> float:
    """
    Pearson test of selection frequencies against probabilities over
    quantile bins of the probability. Bins whose probabilities are all 0
    or 1 carry no variance and must match exactly.
    """
    edges = np.unique(np.quantile(probs, np.linspace(0, 1, n_bins + 1)))
    if edges.size > 1:
        index = np.clip(np.searchsorted(edges, probs, side='right') - 1, 0, edges.size - 2)
    else:
        index = np.zeros(probs.size, dtype=int)
    k = int(index.max()) + 1
    observed = np.bincount(index, weights=selected.astype(np.float64), minlength=k)
    expected = np.bincount(index, weights=probs, minlength=k)
    variance = np.bincount(index, weights=probs * (1 - probs), minlength=k)

    random_bins = variance > 0
    if np.any(np.abs(observed[~random_bins] - expected[~random_bins]) > 1e-9):
        return 0.0
    if not random_bins.any():
        return 1.0
    statistic = float(np.sum((observed[random_bins] - expected[random_bins]) ** 2 / variance[random_bins]))
    return float(chi2.sf(statistic, int(random_bins.sum())))


def check_selection_probabilities(seed: int, n: int, fault: str = FAULT_NONE) -> PropertyResult:
    ipw = ipw_step(fault)
    for scenario in Scenario:
        dataset = sample_dataset(ScenarioSpec(scenario), n, derive_seed(seed, STREAM_VALIDATION, 4, scenario.number))
        pvalue = selection_consistency_pvalue(dataset.selected, dataset.selection_probs)
        if pvalue < CONSISTENCY_ALPHA:
            return PropertyResult(
                'selection_prob', False, scenario.number,
                f'{scenario.value}: selection frequencies disagree with probabilities (p={pvalue:.2e})',
                {'scenario': scenario.value, 'n': n, 'pvalue': pvalue},
            )
        weighted = ipw(dataset.selection_batch())
        deviation = float(np.max(np.abs(weighted.weights * weighted.selection_probs - 1.0), initial=0.0))
        if deviation > WEIGHT_IDENTITY_TOLERANCE:
            return PropertyResult(
                'selection_prob', False, scenario.number,
                f'{scenario.value}: weight x selection probability deviates from 1 by {deviation:.3g}',
                {'scenario': scenario.value, 'n': n, 'max_deviation': deviation},
            )
    return PropertyResult('selection_prob', True, len(Scenario))


def run_validation_suite(seed: int, quick: bool = False, fault: str = FAULT_NONE) -> List[PropertyResult]:
    instances = 250 if quick else 1000
    n = 2_000 if quick else 10_000
    if fault != FAULT_NONE:
        logger.warning(f'fault injected: {fault}')
    results = [
        check_pairwise_auroc(seed, instances, fault),
        check_replication(seed, instances, fault),
        check_unit_weight(seed, instances),
        check_selection_probabilities(seed, n, fault),
    ]
    for result in results:
        logger.info(f'{result.name}: {"pass" if result.passed else "FAIL"} after {result.checked} checks')
    return results
