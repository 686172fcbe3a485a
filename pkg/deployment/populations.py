"""
Scored populations the deployment simulator runs on.

Three sources are supported: the full population of the synthetic DGP,
a synthetic clinical scorer with a chosen prevalence and separation, and
an external headered CSV of (score, label) pairs.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Callable, Union

import numpy as np
import pandas as pd
from scipy.special import expit, logit

from evaluation.exceptions import InvalidParameterError
from evaluation.types import SampleBatch
from synthetic.dgp import DgpParams, Scenario, ScenarioSpec, sample_dataset
from synthetic.seeding import SeedLike, make_rng

from .exceptions import PopulationFileError

logger = logging.getLogger(__name__)

MIN_CLASS_ROWS = 30
POPULATION_COLUMNS = ('score', 'label')

# prevalences of the three lab test sets the clinical scorer stands in for
CLINICAL_PREVALENCES = (0.79, 0.57, 0.27)


class Provenance(Enum):
    SYNTHETIC_DGP = 'dgp'
    SYNTHETIC_CLINICAL = 'clinical'
    EXTERNAL_FILE = 'external'


@dataclass(frozen=True, eq=False)
class ScoredPopulation:
    scores: np.ndarray
    labels: np.ndarray
    provenance: Provenance
    source: str = ''

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        labels = np.asarray(self.labels).reshape(-1)
        if scores.shape != labels.shape:
            raise InvalidParameterError('scores and labels must have equal length')
        if scores.size == 0:
            raise InvalidParameterError('population is empty')
        if not np.all(np.isfinite(scores)) or scores.min() < 0.0 or scores.max() > 1.0:
            raise InvalidParameterError('scores must lie in [0, 1]')
        if not np.all((labels == 0) | (labels == 1)):
            raise InvalidParameterError('labels must be 0 or 1')
        object.__setattr__(self, 'scores', scores)
        object.__setattr__(self, 'labels', labels.astype(np.int8))

    def __len__(self) -> int:
        return int(self.scores.shape[0])

    @property
    def prevalence(self) -> float:
        return float(self.labels.mean())

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive

    @property
    def has_both_classes(self) -> bool:
        return self.n_positive > 0 and self.n_negative > 0

    @cached_property
    def sorted_batch(self) -> SampleBatch:
        """Fully labeled, unit-weight batch ordered by descending score."""
        return SampleBatch.from_arrays(self.scores, labels=self.labels).sorted_by_score()


PopulationFactory = Callable[[SeedLike], ScoredPopulation]


def synthetic_clinical_population(n: int, prevalence: float, separation: float, seed: SeedLike) -> ScoredPopulation:
    """
    Labels at the given prevalence, latent z | y ~ Normal(+-separation/2, 1)
    and score = P(y=1 | z) = sigmoid(logit(prevalence) + separation * z),
    so scores are calibrated by construction and AUROC = Phi(separation / sqrt(2)).
    """
    if n < 2:
        raise InvalidParameterError(f'n must be >= 2, got {n}')
    if not 0.0 < prevalence < 1.0:
        raise InvalidParameterError(f'prevalence must lie in (0, 1), got {prevalence}')
    if not separation > 0.0:
        raise InvalidParameterError(f'separation must be positive, got {separation}')

    rng = make_rng(seed)
    labels = (rng.random(n) < prevalence).astype(np.int8)
    z = rng.standard_normal(n) + separation * (labels - 0.5)
    scores = expit(logit(prevalence) + separation * z)

    population = ScoredPopulation(scores, labels, Provenance.SYNTHETIC_CLINICAL)
    if not population.has_both_classes:
        raise InvalidParameterError(f'n={n} too small to realize both classes at prevalence {prevalence}')
    return population


def dgp_population(n: int, seed: SeedLike, dgp: DgpParams = DgpParams()) -> ScoredPopulation:
    """Full (score, label) population of the synthetic DGP, every label observed."""
    dataset = sample_dataset(ScenarioSpec(Scenario.SCAR, pi1=1.0, dgp=dgp), n, seed)
    population = ScoredPopulation(dataset.scores, dataset.y, Provenance.SYNTHETIC_DGP)
    if not population.has_both_classes:
        raise InvalidParameterError(f'n={n} too small to realize both classes')
    return population


def _parse_row(line: int, score, label):
    score, label = str(score).strip(), str(label).strip()
    try:
        value = float(score)
    except ValueError:
        raise PopulationFileError(f'line {line}: score {score!r} is not a number', line=line)
    if not (np.isfinite(value) and 0.0 <= value <= 1.0):
        raise PopulationFileError(f'line {line}: score {score!r} outside [0, 1]', line=line)
    if label not in ('0', '1'):
        raise PopulationFileError(f'line {line}: label {label!r} is not 0 or 1', line=line)
    return value, int(label)


def load_population_csv(path: Union[str, Path]) -> ScoredPopulation:
    """Read a headered score,label CSV; errors name the offending line (header is line 1)."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True, skip_blank_lines=False)
    except FileNotFoundError:
        raise PopulationFileError(f'{path}: no such file')
    except pd.errors.EmptyDataError:
        raise PopulationFileError(f'{path}: file is empty')
    except pd.errors.ParserError as exc:
        raise PopulationFileError(f'{path}: {exc}')
    except (OSError, UnicodeDecodeError) as exc:
        raise PopulationFileError(f'{path}: unreadable ({exc})')

    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in POPULATION_COLUMNS if c not in frame.columns]
    if missing:
        raise PopulationFileError(f'{path} line 1: header lacks column(s) {", ".join(missing)}', line=1)
    if frame.empty:
        raise PopulationFileError(f'{path}: no data rows')

    scores = np.empty(len(frame))
    labels = np.empty(len(frame), dtype=np.int8)
    for i, (score, label) in enumerate(zip(frame['score'], frame['label'])):
        try:
            scores[i], labels[i] = _parse_row(i + 2, score, label)
        except PopulationFileError as exc:
            raise PopulationFileError(f'{path} {exc.message}', **exc.details)

    population = ScoredPopulation(scores, labels, Provenance.EXTERNAL_FILE, source=str(path))
    if min(population.n_positive, population.n_negative) < MIN_CLASS_ROWS:
        logger.warning(
            f'{path}: {population.n_positive} positive and {population.n_negative} negative rows; '
            f'fewer than {MIN_CLASS_ROWS} in a class gives wide intervals'
        )
    return population
