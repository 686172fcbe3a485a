"""
Weighted binary classification metric estimators.

Every estimator takes a population (list of WeightedSample or a
SampleBatch) and normalises by the total weight of the population it is
given, so a population of unit weights yields the textbook unweighted
metric and a population produced by ipw_weights yields the inverse
probability weighted estimate.

Conventions:
    * a score counts as a positive prediction when score >= threshold;
    * tied scores form one threshold group, i.e. one curve vertex;
    * ROC area uses trapezoidal integration, PR area uses the
      interpolation-free step sum of average precision.
"""

import logging
from enum import Enum
from typing import Dict, Iterable, Tuple

import numpy as np
from django.conf import settings

from .exceptions import (
    DegenerateCurveError,
    EmptyPopulationError,
    InvalidParameterError,
    PositivityViolation,
    UnlabeledSampleError,
)
from .types import (
    CalibrationBin,
    CurveEstimate,
    CurveKind,
    CurvePoint,
    MetricValue,
    NO_DATA,
    SampleBatch,
    SampleInput,
    WeightedConfusion,
    as_batch,
)

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = getattr(settings, 'SELECTION_EVAL_THRESHOLD', 0.5)
DEFAULT_CALIBRATION_BINS = getattr(settings, 'SELECTION_EVAL_CALIBRATION_BINS', 5)

ROC_DEGENERATE = 'degenerate ROC: one class absent'
PR_DEGENERATE = 'degenerate PR: no positives'


class MetricName(Enum):
    SENSITIVITY = 'sensitivity'
    SPECIFICITY = 'specificity'
    PPV = 'ppv'
    ACCURACY = 'accuracy'
    AUROC = 'auroc'
    AUPRC = 'auprc'

    @property
    def label(self) -> str:
        return METRIC_LABELS[self]


METRIC_LABELS = {
    MetricName.SENSITIVITY: 'Sensitivity',
    MetricName.SPECIFICITY: 'Specificity',
    MetricName.PPV: 'PPV',
    MetricName.ACCURACY: 'Accuracy',
    MetricName.AUROC: 'AUROC',
    MetricName.AUPRC: 'AUPRC',
}


THRESHOLD_METRICS = (MetricName.SENSITIVITY, MetricName.SPECIFICITY, MetricName.PPV, MetricName.ACCURACY)
CURVE_METRICS = (MetricName.AUROC, MetricName.AUPRC)
ALL_METRICS = THRESHOLD_METRICS + CURVE_METRICS


def _check_threshold(threshold: float):
    if not 0.0 <= threshold <= 1.0:
        raise InvalidParameterError(f'threshold must lie in [0, 1], got {threshold}')


def _labeled_batch(samples: SampleInput) -> SampleBatch:
    batch = as_batch(samples)
    if len(batch) == 0:
        raise EmptyPopulationError()
    if not batch.is_fully_labeled:
        raise UnlabeledSampleError()
    return batch


# Confusion-based metrics

def weighted_confusion(samples: SampleInput, threshold: float = DEFAULT_THRESHOLD) -> WeightedConfusion:
    _check_threshold(threshold)
    batch = _labeled_batch(samples)

    predicted = batch.scores >= threshold
    positive = batch.labels == 1
    w = batch.weights
    return WeightedConfusion(
        wtp=float(w[predicted & positive].sum()),
        wfp=float(w[predicted & ~positive].sum()),
        wtn=float(w[~predicted & ~positive].sum()),
        wfn=float(w[~predicted & positive].sum()),
        threshold=float(threshold),
    )


def _ratio(numerator: float, denominator: float, reason: str) -> MetricValue:
    if denominator <= 0:
        return MetricValue.undefined(reason)
    return MetricValue(numerator / denominator)


def sensitivity(c: WeightedConfusion) -> MetricValue:
    return _ratio(c.wtp, c.wtp + c.wfn, 'sensitivity: no positive labels')


def specificity(c: WeightedConfusion) -> MetricValue:
    return _ratio(c.wtn, c.wtn + c.wfp, 'specificity: no negative labels')


def ppv(c: WeightedConfusion) -> MetricValue:
    return _ratio(c.wtp, c.wtp + c.wfp, 'ppv: no predicted positives')


def accuracy(c: WeightedConfusion) -> MetricValue:
    return _ratio(c.wtp + c.wtn, c.total, 'accuracy: empty population')


_CONFUSION_METRICS = {
    MetricName.SENSITIVITY: sensitivity,
    MetricName.SPECIFICITY: specificity,
    MetricName.PPV: ppv,
    MetricName.ACCURACY: accuracy,
}


def threshold_metrics(samples: SampleInput, threshold: float = DEFAULT_THRESHOLD) -> Dict[MetricName, MetricValue]:
    confusion = weighted_confusion(samples, threshold)
    return {name: fn(confusion) for name, fn in _CONFUSION_METRICS.items()}


# Threshold sweep shared by the ROC and PR estimators

def _threshold_sweep(batch: SampleBatch) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct scores (descending) with cumulative weighted TP and FP mass at each."""
    batch = batch.sorted_by_score()
    positive = batch.labels == 1
    tp = np.cumsum(np.where(positive, batch.weights, 0.0))
    fp = np.cumsum(np.where(positive, 0.0, batch.weights))
    # last row of every tie group
    ends = np.append(np.flatnonzero(np.diff(batch.scores)), len(batch) - 1)
    return batch.scores[ends], tp[ends], fp[ends]


def _roc_arrays(tp: np.ndarray, fp: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    total_pos, total_neg = tp[-1], fp[-1]
    if total_pos <= 0 or total_neg <= 0:
        raise DegenerateCurveError(ROC_DEGENERATE)
    fpr = np.concatenate(([0.0], fp / total_neg))
    tpr = np.concatenate(([0.0], tp / total_pos))
    return fpr, tpr


def _trapezoid(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1])) / 2.0)


def _pr_arrays(tp: np.ndarray, fp: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    total_pos = tp[-1]
    if total_pos <= 0:
        raise DegenerateCurveError(PR_DEGENERATE)
    return tp / total_pos, tp / (tp + fp)


def _step_area(recall: np.ndarray, precision: np.ndarray) -> float:
    return float(np.sum(np.diff(recall, prepend=0.0) * precision))


def weighted_auroc(samples: SampleInput) -> float:
    """Area under the weighted ROC curve without materialising the point list."""
    _, tp, fp = _threshold_sweep(_labeled_batch(samples))
    return _trapezoid(*_roc_arrays(tp, fp))


def weighted_auprc(samples: SampleInput) -> float:
    _, tp, fp = _threshold_sweep(_labeled_batch(samples))
    return _step_area(*_pr_arrays(tp, fp))


def weighted_roc(samples: SampleInput) -> CurveEstimate:
    _, tp, fp = _threshold_sweep(_labeled_batch(samples))
    fpr, tpr = _roc_arrays(tp, fp)
    points = tuple(CurvePoint(float(x), float(y)) for x, y in zip(fpr, tpr))
    return CurveEstimate(kind=CurveKind.ROC, points=points, area=_trapezoid(fpr, tpr))


def weighted_pr(samples: SampleInput) -> CurveEstimate:
    _, tp, fp = _threshold_sweep(_labeled_batch(samples))
    recall, precision = _pr_arrays(tp, fp)
    # recall-0 anchor follows the usual convention of precision 1
    points = (CurvePoint(0.0, 1.0),) + tuple(
        CurvePoint(float(r), float(p)) for r, p in zip(recall, precision)
    )
    return CurveEstimate(kind=CurveKind.PR, points=points, area=_step_area(recall, precision))


# Calibration

def calibration_curve(samples: SampleInput, n_bins: int = DEFAULT_CALIBRATION_BINS) -> CurveEstimate:
    """
    Equal-width calibration bins over [0, 1].

    Bins are left-closed, the last one also right-closed. Each bin reports
    the weighted mean score and the weighted outcome prevalence; bins that
    receive no mass are reported with the NO_DATA point.
    """
    if isinstance(n_bins, bool) or not isinstance(n_bins, (int, np.integer)) or n_bins < 1:
        raise InvalidParameterError(f'n_bins must be an integer >= 1, got {n_bins!r}')
    batch = _labeled_batch(samples)

    index = np.minimum((batch.scores * n_bins).astype(np.int64), n_bins - 1)
    w = batch.weights
    mass = np.bincount(index, weights=w, minlength=n_bins)
    pred = np.bincount(index, weights=w * batch.scores, minlength=n_bins)
    pos = np.bincount(index, weights=w * (batch.labels == 1), minlength=n_bins)

    bins = []
    points = []
    for k in range(n_bins):
        if mass[k] > 0:
            mean_pred = min(1.0, max(0.0, float(pred[k] / mass[k])))
            prevalence = min(1.0, max(0.0, float(pos[k] / mass[k])))
            points.append(CurvePoint(mean_pred, prevalence))
        else:
            mean_pred = prevalence = None
            points.append(NO_DATA)
        bins.append(CalibrationBin(
            index=k,
            lo=k / n_bins,
            hi=(k + 1) / n_bins,
            mean_pred=mean_pred,
            prevalence=prevalence,
            weight_mass=float(mass[k]),
        ))

    return CurveEstimate(
        kind=CurveKind.CALIBRATION,
        points=tuple(points),
        bin_counts=tuple(float(m) for m in mass),
        bins=tuple(bins),
    )


# Inverse probability weighting

def ipw_weights(samples: SampleInput) -> SampleBatch:
    """Selected samples only, each weighted by the inverse of its selection probability."""
    batch = as_batch(samples)
    observed = batch.subset(batch.selected)
    if len(observed) and observed.selection_probs.min() <= 0.0:
        raise PositivityViolation(
            'positivity violation: selected sample with zero selection probability'
        )
    return observed.with_weights(1.0 / observed.selection_probs)


# Dispatch

def evaluate_metrics(
    samples: SampleInput,
    metrics: Iterable[MetricName] = ALL_METRICS,
    threshold: float = DEFAULT_THRESHOLD,
) -> Dict[MetricName, MetricValue]:
    """
    Evaluate several metrics on one population, sharing the confusion
    matrix and the threshold sweep. Degenerate curves become undefined
    values carrying the error message.
    """
    metrics = tuple(metrics)
    batch = _labeled_batch(samples)
    results: Dict[MetricName, MetricValue] = {}

    if any(m in _CONFUSION_METRICS for m in metrics):
        confusion = weighted_confusion(batch, threshold)
        for name in metrics:
            if name in _CONFUSION_METRICS:
                results[name] = _CONFUSION_METRICS[name](confusion)

    if any(m in CURVE_METRICS for m in metrics):
        _, tp, fp = _threshold_sweep(batch)
        if MetricName.AUROC in metrics:
            results[MetricName.AUROC] = _curve_metric(lambda: _trapezoid(*_roc_arrays(tp, fp)))
        if MetricName.AUPRC in metrics:
            results[MetricName.AUPRC] = _curve_metric(lambda: _step_area(*_pr_arrays(tp, fp)))

    return {name: results[name] for name in metrics}


def evaluate_metric(name: MetricName, samples: SampleInput, threshold: float = DEFAULT_THRESHOLD) -> MetricValue:
    return evaluate_metrics(samples, (name,), threshold)[name]


def _curve_metric(compute) -> MetricValue:
    try:
        return MetricValue(compute())
    except DegenerateCurveError as exc:
        return MetricValue.undefined(exc.message)
