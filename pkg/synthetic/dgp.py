"""
Synthetic data-generating process with a perfectly specified scorer.

Features are drawn uniformly from the square [-alpha, beta]^2, the label
from Bernoulli(sigmoid(omega1*x1 + omega2*x2 + gamma)) and the scorer is
that same sigmoid, so it is calibrated by construction. Five selection
mechanisms decide which labels are observed:

    SCAR             constant probability pi1
    SELECT_HARD      exp(-d(x)), 1 on the decision boundary
    SELECT_EASY      exp(d(x) - delta), 1 at the support point furthest
                     from the boundary
    SELECT_NEGATIVE  pi1*y + pi2*(1 - y) with pi1=0.5, pi2=1
    SELECT_POSITIVE  pi1*y + pi2*(1 - y) with pi1=1, pi2=0.5

where d(x) is the Euclidean distance to the decision boundary. The
support is read as Uniform(-alpha, beta): with alpha = beta = 2 the
boundary x1 + x2 = 0 bisects it and the classes are balanced.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Tuple

import numpy as np
from scipy.special import expit

from evaluation.exceptions import InvalidParameterError
from evaluation.metrics import ipw_weights
from evaluation.types import SampleBatch

from .seeding import SeedLike, make_rng

logger = logging.getLogger(__name__)


class Scenario(Enum):
    SCAR = 'scar'
    SELECT_HARD = 'select_hard'
    SELECT_EASY = 'select_easy'
    SELECT_NEGATIVE = 'select_negative'
    SELECT_POSITIVE = 'select_positive'

    @property
    def number(self) -> int:
        return list(Scenario).index(self) + 1

    @property
    def title(self) -> str:
        return SCENARIO_TITLES[self]


SCENARIO_TITLES = {
    Scenario.SCAR: 'Selection completely at random',
    Scenario.SELECT_HARD: 'Select hard',
    Scenario.SELECT_EASY: 'Select easy',
    Scenario.SELECT_NEGATIVE: 'Select negative',
    Scenario.SELECT_POSITIVE: 'Select positive',
}

LABEL_DEPENDENT = (Scenario.SELECT_NEGATIVE, Scenario.SELECT_POSITIVE)
FEATURE_DEPENDENT = (Scenario.SELECT_HARD, Scenario.SELECT_EASY)

# (pi1, pi2) defaults
DEFAULT_PI = {
    Scenario.SCAR: (0.5, None),
    Scenario.SELECT_HARD: (None, None),
    Scenario.SELECT_EASY: (None, None),
    Scenario.SELECT_NEGATIVE: (0.5, 1.0),
    Scenario.SELECT_POSITIVE: (1.0, 0.5),
}


class DeltaMode(Enum):
    """Domain of the maximum distance used by SELECT_EASY."""
    SUPPORT = 'support'
    SAMPLE = 'sample'


@dataclass(frozen=True)
class DgpParams:
    alpha: float = 2.0
    beta: float = 2.0
    omega1: float = 1.0
    omega2: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if not -self.alpha < self.beta:
            raise InvalidParameterError(
                f'feature support [-{self.alpha}, {self.beta}] is empty'
            )

    @property
    def support(self) -> Tuple[float, float]:
        return -self.alpha, self.beta

    @property
    def corners(self) -> Tuple[Tuple[float, float], ...]:
        lo, hi = self.support
        return (lo, lo), (lo, hi), (hi, lo), (hi, hi)

    def logit(self, x1, x2):
        return self.omega1 * x1 + self.omega2 * x2 + self.gamma

    def straddles_boundary(self) -> bool:
        values = [self.logit(x1, x2) for x1, x2 in self.corners]
        return min(values) < 0 < max(values)


@dataclass(frozen=True)
class ScenarioSpec:
    """One selection scenario plus the DGP constants it runs on."""
    scenario: Scenario
    pi1: Optional[float] = None
    pi2: Optional[float] = None
    dgp: DgpParams = field(default_factory=DgpParams)
    delta_mode: DeltaMode = DeltaMode.SUPPORT

    def __post_init__(self):
        default_pi1, default_pi2 = DEFAULT_PI[self.scenario]
        if self.scenario in FEATURE_DEPENDENT:
            if self.pi1 is not None or self.pi2 is not None:
                raise InvalidParameterError(f'{self.scenario.value} takes no pi parameters')
            return
        if self.scenario is Scenario.SCAR and self.pi2 is not None:
            raise InvalidParameterError('scar uses pi1 only')

        if self.pi1 is None:
            object.__setattr__(self, 'pi1', default_pi1)
        if self.pi2 is None:
            object.__setattr__(self, 'pi2', default_pi2)
        for name in ('pi1', 'pi2'):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise InvalidParameterError(f'{name} must lie in [0, 1], got {value}')

    @classmethod
    def default(cls, scenario: Scenario) -> 'ScenarioSpec':
        return cls(scenario)

    @property
    def slug(self) -> str:
        return self.scenario.value


@dataclass(frozen=True)
class SimulatedExample:
    x1: float
    x2: float
    y: int
    score: float
    selection_prob: float
    selected: bool


def sigmoid(z):
    return expit(z)


def boundary_distance(x1, x2, dgp: DgpParams):
    """Euclidean distance from (x1, x2) to the line omega1*x1 + omega2*x2 + gamma = 0."""
    norm = math.hypot(dgp.omega1, dgp.omega2)
    if norm == 0:
        raise InvalidParameterError('decision boundary undefined for a zero weight vector')
    return np.abs(dgp.logit(x1, x2)) / norm


def support_delta(dgp: DgpParams) -> float:
    """Supremum of the boundary distance over the feature support."""
    return float(max(boundary_distance(x1, x2, dgp) for x1, x2 in dgp.corners))


def _selection_probabilities(x1, x2, y, spec: ScenarioSpec, delta: Optional[float] = None):
    scenario = spec.scenario
    if scenario is Scenario.SCAR:
        return np.full(np.shape(x1), spec.pi1, dtype=np.float64)
    if scenario is Scenario.SELECT_HARD:
        return np.exp(-boundary_distance(x1, x2, spec.dgp))
    if scenario is Scenario.SELECT_EASY:
        if delta is None:
            delta = support_delta(spec.dgp)
        return np.minimum(1.0, np.exp(boundary_distance(x1, x2, spec.dgp) - delta))
    y = np.asarray(y)
    return spec.pi1 * y + spec.pi2 * (1 - y)


def selection_probability(x1: float, x2: float, y: int, spec: ScenarioSpec, delta: Optional[float] = None) -> float:
    if spec.scenario is Scenario.SELECT_EASY and delta is None:
        lo, hi = spec.dgp.support
        if not (lo <= x1 <= hi and lo <= x2 <= hi):
            raise InvalidParameterError(f'({x1}, {x2}) lies outside the feature support')
    return float(_selection_probabilities(x1, x2, y, spec, delta))


@dataclass(frozen=True, eq=False)
class SimulatedDataset(Sequence):
    """Columnar sample of (x, y, s) with the scorer output and selection probability."""
    spec: ScenarioSpec
    x1: np.ndarray
    x2: np.ndarray
    y: np.ndarray
    scores: np.ndarray
    selection_probs: np.ndarray
    selected: np.ndarray

    def __len__(self) -> int:
        return int(self.y.shape[0])

    def __getitem__(self, index) -> SimulatedExample:
        return SimulatedExample(
            x1=float(self.x1[index]),
            x2=float(self.x2[index]),
            y=int(self.y[index]),
            score=float(self.scores[index]),
            selection_prob=float(self.selection_probs[index]),
            selected=bool(self.selected[index]),
        )

    def __iter__(self) -> Iterator[SimulatedExample]:
        for i in range(len(self)):
            yield self[i]

    @property
    def observed_fraction(self) -> float:
        return float(self.selected.mean())

    def full_population(self) -> SampleBatch:
        return SampleBatch.from_arrays(self.scores, labels=self.y)

    def selection_batch(self) -> SampleBatch:
        return SampleBatch.from_arrays(
            self.scores, labels=self.y, selected=self.selected, selection_probs=self.selection_probs
        )

    def observed_population(self) -> SampleBatch:
        return self.selection_batch().subset(self.selected)

    def weighted_population(self) -> SampleBatch:
        return ipw_weights(self.selection_batch())


def sample_dataset(spec: ScenarioSpec, n: int, seed: SeedLike) -> SimulatedDataset:
    """
    Draw n examples. The result is a pure function of (spec, n, seed):
    features, then labels, then selection coins come from one generator
    in that order.
    """
    if n < 1:
        raise InvalidParameterError(f'n must be >= 1, got {n}')
    if not spec.dgp.straddles_boundary():
        raise InvalidParameterError('feature support does not straddle the decision boundary')

    rng = make_rng(seed)
    lo, hi = spec.dgp.support
    x = rng.uniform(lo, hi, size=(n, 2))
    x1, x2 = x[:, 0], x[:, 1]
    scores = sigmoid(spec.dgp.logit(x1, x2))
    y = (rng.random(n) < scores).astype(np.int8)

    delta = None
    if spec.scenario is Scenario.SELECT_EASY and spec.delta_mode is DeltaMode.SAMPLE:
        delta = float(boundary_distance(x1, x2, spec.dgp).max())
    selection_probs = _selection_probabilities(x1, x2, y, spec, delta)
    selected = rng.random(n) < selection_probs

    logger.debug(
        f'{spec.slug}: sampled {n} examples, observed fraction {selected.mean():.3f}'
    )
    return SimulatedDataset(spec, x1, x2, y, scores, selection_probs, selected)
