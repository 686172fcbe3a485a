"""
Monte Carlo runner for the five selection scenarios.

Each replicate samples a fresh dataset and evaluates every metric three
ways:

    actual    full population, unit weights
    observed  selected examples only, unit weights
    weighted  selected examples only, inverse selection probability weights

Replicates where a metric is undefined (e.g. only one class observed)
are counted and left out of the interval; a triplet is flagged when more
than SELECTION_EVAL_FLAG_FRACTION of its replicates were undefined.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from evaluation.exceptions import InvalidParameterError
from evaluation.metrics import ALL_METRICS, DEFAULT_CALIBRATION_BINS, DEFAULT_THRESHOLD, MetricName, calibration_curve, evaluate_metrics
from evaluation.types import CurveEstimate, SampleBatch
from synthetic.dgp import ScenarioSpec, sample_dataset
from synthetic.seeding import STREAM_SCENARIO, SeedLike, derive_seed

from .aggregation import PointInterval, summarize
from .parallel import DEFAULT_WORKERS, map_replicates

logger = logging.getLogger(__name__)

FLAG_FRACTION = getattr(settings, 'SELECTION_EVAL_FLAG_FRACTION', 0.10)


class Estimator(Enum):
    ACTUAL = 'actual'
    OBSERVED = 'observed'
    WEIGHTED = 'weighted'


@dataclass(frozen=True)
class MetricTriplet:
    metric_name: MetricName
    actual: PointInterval
    observed: PointInterval
    weighted: PointInterval
    flagged: bool = False

    def interval(self, estimator: Estimator) -> PointInterval:
        return getattr(self, estimator.value)


@dataclass(frozen=True)
class CalibrationBinSummary:
    """One calibration bin aggregated over replicates."""
    bin_index: int
    bin_lo: float
    bin_hi: float
    mean_pred: Optional[float]
    prevalence: PointInterval
    weight_mass: float

    @property
    def n_with_data(self) -> int:
        return self.prevalence.n_values


@dataclass(frozen=True)
class ScenarioResult:
    spec: ScenarioSpec
    n: int
    n_reps: int
    threshold: float
    n_bins: int
    triplets: Tuple[MetricTriplet, ...]
    calibration: Dict[Estimator, Tuple[CalibrationBinSummary, ...]]
    mean_observed_fraction: float

    def triplet(self, metric: MetricName) -> MetricTriplet:
        for triplet in self.triplets:
            if triplet.metric_name is metric:
                return triplet
        raise KeyError(metric)

    @property
    def flagged_metrics(self) -> List[MetricName]:
        return [t.metric_name for t in self.triplets if t.flagged]


@dataclass(frozen=True)
class ReplicateOutcome:
    metrics: Dict[Estimator, Dict[MetricName, Optional[float]]]
    calibration: Dict[Estimator, Optional[CurveEstimate]]
    observed_fraction: float


def estimator_populations(dataset) -> Dict[Estimator, SampleBatch]:
    return {
        Estimator.ACTUAL: dataset.full_population(),
        Estimator.OBSERVED: dataset.observed_population(),
        Estimator.WEIGHTED: dataset.weighted_population(),
    }


def run_replicate(
    spec: ScenarioSpec,
    n: int,
    seed: SeedLike,
    metrics: Sequence[MetricName] = ALL_METRICS,
    threshold: float = DEFAULT_THRESHOLD,
    n_bins: int = DEFAULT_CALIBRATION_BINS,
) -> ReplicateOutcome:
    dataset = sample_dataset(spec, n, seed)
    values: Dict[Estimator, Dict[MetricName, Optional[float]]] = {}
    curves: Dict[Estimator, Optional[CurveEstimate]] = {}

    for estimator, batch in estimator_populations(dataset).items():
        if len(batch) == 0:
            values[estimator] = {name: None for name in metrics}
            curves[estimator] = None
            continue
        evaluated = evaluate_metrics(batch, metrics, threshold)
        values[estimator] = {name: value.value for name, value in evaluated.items()}
        curves[estimator] = calibration_curve(batch, n_bins)

    return ReplicateOutcome(values, curves, dataset.observed_fraction)


def _summarize_calibration(
    outcomes: Sequence[ReplicateOutcome], estimator: Estimator, n_bins: int
) -> Tuple[CalibrationBinSummary, ...]:
    summaries = []
    for k in range(n_bins):
        prevalences: List[Optional[float]] = []
        predictions: List[float] = []
        masses: List[float] = []
        for outcome in outcomes:
            curve = outcome.calibration[estimator]
            if curve is None:
                prevalences.append(None)
                masses.append(0.0)
                continue
            calibration_bin = curve.bins[k]
            prevalences.append(calibration_bin.prevalence)
            masses.append(calibration_bin.weight_mass)
            if calibration_bin.has_data:
                predictions.append(calibration_bin.mean_pred)
        summaries.append(CalibrationBinSummary(
            bin_index=k,
            bin_lo=k / n_bins,
            bin_hi=(k + 1) / n_bins,
            mean_pred=float(np.mean(np.sort(predictions))) if predictions else None,
            prevalence=summarize(prevalences),
            weight_mass=float(np.mean(np.sort(masses))),
        ))
    return tuple(summaries)


def run_scenario(
    spec: ScenarioSpec,
    n: int,
    n_reps: int,
    threshold: float = DEFAULT_THRESHOLD,
    seed: SeedLike = 0,
    metrics: Iterable[MetricName] = ALL_METRICS,
    n_bins: int = DEFAULT_CALIBRATION_BINS,
    workers: int = DEFAULT_WORKERS,
) -> ScenarioResult:
    """
    Run n_reps replicates of one scenario. Replicate r of scenario k uses
    derive_seed(seed, STREAM_SCENARIO, k, r), so results are identical for
    any worker count.
    """
    if n < 2:
        raise InvalidParameterError(f'n must be >= 2, got {n}')
    if n_reps < 1:
        raise InvalidParameterError(f'n_reps must be >= 1, got {n_reps}')
    if not 0.0 <= threshold <= 1.0:
        raise InvalidParameterError(f'threshold must lie in [0, 1], got {threshold}')
    metrics = tuple(m for m in ALL_METRICS if m in set(metrics))

    seeds = [derive_seed(seed, STREAM_SCENARIO, spec.scenario.number, r) for r in range(n_reps)]
    outcomes = map_replicates(
        lambda s: run_replicate(spec, n, s, metrics, threshold, n_bins), seeds, workers
    )

    triplets = []
    for metric in metrics:
        intervals = {
            estimator: summarize(o.metrics[estimator][metric] for o in outcomes)
            for estimator in Estimator
        }
        flagged = any(i.n_undefined > FLAG_FRACTION * n_reps for i in intervals.values())
        if flagged:
            logger.warning(
                f'{spec.slug}: {metric.value} undefined in more than '
                f'{FLAG_FRACTION:.0%} of {n_reps} replicates'
            )
        triplets.append(MetricTriplet(
            metric_name=metric,
            actual=intervals[Estimator.ACTUAL],
            observed=intervals[Estimator.OBSERVED],
            weighted=intervals[Estimator.WEIGHTED],
            flagged=flagged,
        ))

    calibration = {
        estimator: _summarize_calibration(outcomes, estimator, n_bins) for estimator in Estimator
    }
    fractions = np.sort([o.observed_fraction for o in outcomes])

    logger.info(f'{spec.slug}: {n_reps} replicates of n={n} finished')
    return ScenarioResult(
        spec=spec,
        n=n,
        n_reps=n_reps,
        threshold=threshold,
        n_bins=n_bins,
        triplets=tuple(triplets),
        calibration=calibration,
        mean_observed_fraction=float(fractions.mean()),
    )
