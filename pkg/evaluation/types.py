"""
Value types consumed and produced by the weighted metric estimators.

A population is handed to the estimators either as a list of
WeightedSample objects or as a SampleBatch, the columnar equivalent used
by the simulation code. Both describe the same thing: a model score, an
optional outcome label, the selection indicator, the probability of
selection and the weight the example carries in an estimate.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from .exceptions import InvalidParameterError, UndefinedMetricError

UNLABELED = -1


@dataclass(frozen=True)
class WeightedSample:
    """
    One evaluation unit: score, label (iff selected), selection probability and weight.

    A selection probability of 0 is accepted here; ipw_weights raises
    PositivityViolation once such a sample is selected.
    """
    score: float
    label: Optional[int] = None
    selected: bool = True
    selection_prob: float = 1.0
    weight: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InvalidParameterError(f'score must lie in [0, 1], got {self.score}')
        if not 0.0 <= self.selection_prob <= 1.0:
            raise InvalidParameterError(
                f'selection_prob must lie in [0, 1], got {self.selection_prob}'
            )
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise InvalidParameterError(f'weight must be positive, got {self.weight}')
        if self.selected and self.label not in (0, 1):
            raise InvalidParameterError('a selected sample needs a 0/1 label')
        if not self.selected and self.label is not None:
            raise InvalidParameterError('the label of an unselected sample is not observable')


@dataclass(frozen=True, eq=False)
class SampleBatch(Sequence):
    """
    Columnar population of weighted samples.

    Labels of unselected rows are stored as UNLABELED. When is_sorted is
    set the rows are ordered by descending score; subsets keep the order,
    which lets the curve estimators skip the sort.
    """
    scores: np.ndarray
    labels: np.ndarray
    selected: np.ndarray
    selection_probs: np.ndarray
    weights: np.ndarray
    is_sorted: bool = False

    @classmethod
    def from_arrays(
        cls,
        scores,
        labels=None,
        selected=None,
        selection_probs=None,
        weights=None,
    ) -> 'SampleBatch':
        scores = np.asarray(scores, dtype=np.float64).reshape(-1)
        n = scores.shape[0]

        if selected is None:
            selected = np.full(n, labels is not None, dtype=bool)
        selected = np.asarray(selected, dtype=bool).reshape(-1)

        if labels is None:
            labels = np.full(n, UNLABELED, dtype=np.int8)
        labels = np.asarray(labels).reshape(-1)

        if selection_probs is None:
            selection_probs = np.ones(n)
        selection_probs = np.asarray(selection_probs, dtype=np.float64).reshape(-1)

        if weights is None:
            weights = np.ones(n)
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)

        if not (selected.shape[0] == labels.shape[0] == selection_probs.shape[0] == weights.shape[0] == n):
            raise InvalidParameterError('sample columns must have equal length')
        labels = np.where(selected, labels, UNLABELED).astype(np.int8)
        if n and (not np.all(np.isfinite(scores)) or scores.min() < 0.0 or scores.max() > 1.0):
            raise InvalidParameterError('scores must lie in [0, 1]')
        if n and (selection_probs.min() < 0.0 or selection_probs.max() > 1.0):
            raise InvalidParameterError('selection probabilities must lie in [0, 1]')
        if n and not (np.all(np.isfinite(weights)) and weights.min() > 0.0):
            raise InvalidParameterError('weights must be positive and finite')
        if np.any(selected & (labels != 0) & (labels != 1)):
            raise InvalidParameterError('selected samples need 0/1 labels')

        return cls(scores, labels, selected, selection_probs, weights)

    @classmethod
    def from_samples(cls, samples: Iterable[WeightedSample]) -> 'SampleBatch':
        samples = list(samples)
        return cls.from_arrays(
            scores=[s.score for s in samples],
            labels=[UNLABELED if s.label is None else s.label for s in samples],
            selected=[s.selected for s in samples],
            selection_probs=[s.selection_prob for s in samples],
            weights=[s.weight for s in samples],
        )

    def __len__(self) -> int:
        return int(self.scores.shape[0])

    def __getitem__(self, index):
        if isinstance(index, slice):
            return self._take(np.arange(len(self))[index], keep_order=index.step in (None, 1))
        selected = bool(self.selected[index])
        return WeightedSample(
            score=float(self.scores[index]),
            label=int(self.labels[index]) if selected else None,
            selected=selected,
            selection_prob=float(self.selection_probs[index]),
            weight=float(self.weights[index]),
        )

    def __iter__(self) -> Iterator[WeightedSample]:
        for i in range(len(self)):
            yield self[i]

    def _take(self, index, keep_order: bool) -> 'SampleBatch':
        return SampleBatch(
            self.scores[index],
            self.labels[index],
            self.selected[index],
            self.selection_probs[index],
            self.weights[index],
            is_sorted=self.is_sorted and keep_order,
        )

    def subset(self, mask) -> 'SampleBatch':
        return self._take(np.asarray(mask, dtype=bool), keep_order=True)

    def with_weights(self, weights) -> 'SampleBatch':
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != self.weights.shape:
            raise InvalidParameterError('weight vector has the wrong length')
        return SampleBatch(
            self.scores, self.labels, self.selected, self.selection_probs, weights,
            is_sorted=self.is_sorted,
        )

    def sorted_by_score(self) -> 'SampleBatch':
        if self.is_sorted:
            return self
        order = np.argsort(-self.scores, kind='stable')
        return SampleBatch(
            self.scores[order],
            self.labels[order],
            self.selected[order],
            self.selection_probs[order],
            self.weights[order],
            is_sorted=True,
        )

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def is_fully_labeled(self) -> bool:
        return bool(self.selected.all())


SampleInput = Union[SampleBatch, Iterable[WeightedSample]]


def as_batch(samples: SampleInput) -> SampleBatch:
    if isinstance(samples, SampleBatch):
        return samples
    return SampleBatch.from_samples(samples)


@dataclass(frozen=True)
class WeightedConfusion:
    """Weighted confusion-matrix masses at a threshold."""
    wtp: float
    wfp: float
    wtn: float
    wfn: float
    threshold: float

    @property
    def total(self) -> float:
        return self.wtp + self.wfp + self.wtn + self.wfn

    def scaled(self, factor: float) -> 'WeightedConfusion':
        return WeightedConfusion(
            self.wtp * factor, self.wfp * factor, self.wtn * factor, self.wfn * factor,
            self.threshold,
        )


@dataclass(frozen=True)
class MetricValue:
    """A metric estimate, or an explicit 'undefined' tag carrying the reason."""
    value: Optional[float]
    reason: str = ''

    @classmethod
    def undefined(cls, reason: str) -> 'MetricValue':
        return cls(None, reason)

    @property
    def is_defined(self) -> bool:
        return self.value is not None

    def __float__(self) -> float:
        if self.value is None:
            raise UndefinedMetricError(f'undefined metric: {self.reason}')
        return float(self.value)


class CurveKind(Enum):
    ROC = 'roc'
    PR = 'pr'
    CALIBRATION = 'calibration'


class CurvePoint(NamedTuple):
    x: Optional[float]
    y: Optional[float]

    @property
    def has_data(self) -> bool:
        return self.x is not None and self.y is not None


NO_DATA = CurvePoint(None, None)


@dataclass(frozen=True)
class CalibrationBin:
    index: int
    lo: float
    hi: float
    mean_pred: Optional[float]
    prevalence: Optional[float]
    weight_mass: float

    @property
    def has_data(self) -> bool:
        return self.weight_mass > 0


@dataclass(frozen=True)
class CurveEstimate:
    """Weighted ROC, PR or calibration curve."""
    kind: CurveKind
    points: Tuple[CurvePoint, ...]
    area: Optional[float] = None
    bin_counts: Tuple[float, ...] = ()
    bins: Tuple[CalibrationBin, ...] = field(default=(), repr=False)

    @property
    def xs(self) -> List[Optional[float]]:
        return [p.x for p in self.points]

    @property
    def ys(self) -> List[Optional[float]]:
        return [p.y for p in self.points]
