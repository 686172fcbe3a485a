"""
Deployed-alert feedback loop with randomized alert withholding.

An example is alert eligible when its score is above p_t or below
1 - p_t. For an eligible example a Bernoulli(p_withhold) coin is drawn:
heads withholds the alert and the label is observed with selection
probability p_withhold, tails shows the alert and, under full adherence,
the label is never observed. Ineligible examples are always observed.
Every replicate reports AUROC on the full population (actual), on the
observed examples (observed) and on the observed examples weighted by
1/p_withhold where eligible (weighted).
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np
from django.conf import settings

from evaluation.exceptions import InvalidParameterError, PositivityViolation
from evaluation.metrics import MetricName, evaluate_metric, ipw_weights
from evaluation.types import UNLABELED, SampleBatch
from experiments.aggregation import PointInterval, summarize
from experiments.parallel import DEFAULT_WORKERS, map_replicates
from synthetic.seeding import STREAM_POPULATION, SeedLike, derive_seed, make_rng

from .populations import PopulationFactory, ScoredPopulation

logger = logging.getLogger(__name__)

DEFAULT_SWEEP_REPS = getattr(settings, 'SELECTION_EVAL_SWEEP_REPS', 1000)


@dataclass(frozen=True)
class DeploymentConfig:
    p_t: float
    p_withhold: float
    n_reps: int = DEFAULT_SWEEP_REPS
    seed: SeedLike = 0
    resample_population: bool = False

    def __post_init__(self):
        if not 0.5 < self.p_t < 1.0:
            raise InvalidParameterError(f'p_t must lie in (0.5, 1), got {self.p_t}')
        # p_withhold = 0 is accepted here and rejected by the simulator once eligible examples exist
        if not 0.0 <= self.p_withhold <= 1.0:
            raise InvalidParameterError(f'p_withhold must lie in (0, 1], got {self.p_withhold}')
        if self.n_reps < 1:
            raise InvalidParameterError(f'n_reps must be >= 1, got {self.n_reps}')


@dataclass(frozen=True)
class DeploymentReplicate:
    actual: Optional[float]
    observed: Optional[float]
    weighted: Optional[float]
    observed_fraction: float
    eligible_fraction: float
    eligible_observed_fraction: Optional[float]


@dataclass(frozen=True)
class DeploymentSummary:
    actual: PointInterval
    observed: PointInterval
    weighted: PointInterval
    mean_observed_fraction: float


def alert_eligible(score: float, p_t: float) -> bool:
    if not 0.5 < p_t < 1.0:
        raise InvalidParameterError(f'p_t must lie in (0.5, 1), got {p_t}')
    return score > p_t or score < 1.0 - p_t


def alert_eligible_mask(scores: np.ndarray, p_t: float) -> np.ndarray:
    if not 0.5 < p_t < 1.0:
        raise InvalidParameterError(f'p_t must lie in (0.5, 1), got {p_t}')
    scores = np.asarray(scores, dtype=np.float64)
    return (scores > p_t) | (scores < 1.0 - p_t)


def deployment_batch(population: ScoredPopulation, cfg: DeploymentConfig, rng: np.random.Generator) -> SampleBatch:
    """One draw of the withholding coins over the score-sorted population."""
    base = population.sorted_batch
    eligible = alert_eligible_mask(base.scores, cfg.p_t)
    if cfg.p_withhold == 0.0 and eligible.any():
        raise PositivityViolation('positivity violation: eligible labels never observed')

    withheld = rng.random(len(base)) < cfg.p_withhold
    observed = ~eligible | withheld
    return replace(
        base,
        labels=np.where(observed, base.labels, UNLABELED).astype(np.int8),
        selected=observed,
        selection_probs=np.where(eligible, cfg.p_withhold, 1.0),
    )


def _auroc(batch: SampleBatch) -> Optional[float]:
    if len(batch) == 0:
        return None
    return evaluate_metric(MetricName.AUROC, batch).value


def run_deployment_replicate(
    population: ScoredPopulation, cfg: DeploymentConfig, seed: SeedLike, actual: Optional[float] = None
) -> DeploymentReplicate:
    rng = make_rng(seed)
    batch = deployment_batch(population, cfg, rng)
    if actual is None:
        actual = _auroc(population.sorted_batch)

    eligible = alert_eligible_mask(batch.scores, cfg.p_t)
    n_eligible = int(eligible.sum())
    return DeploymentReplicate(
        actual=actual,
        observed=_auroc(batch.subset(batch.selected)),
        weighted=_auroc(ipw_weights(batch)),
        observed_fraction=float(batch.selected.mean()),
        eligible_fraction=n_eligible / len(batch),
        eligible_observed_fraction=float(batch.selected[eligible].mean()) if n_eligible else None,
    )


def simulate_deployment(
    population: ScoredPopulation,
    cfg: DeploymentConfig,
    population_factory: Optional[PopulationFactory] = None,
    workers: int = DEFAULT_WORKERS,
) -> List[DeploymentReplicate]:
    """
    Run cfg.n_reps replicates. Replicate r draws its coins from
    derive_seed(cfg.seed, r); with resample_population the population of
    replicate r comes from population_factory(derive_seed(cfg.seed, r, STREAM_POPULATION)).
    """
    if cfg.resample_population and population_factory is None:
        raise InvalidParameterError('resample_population needs a population factory')
    if not population.has_both_classes:
        raise InvalidParameterError('deployment population must contain both classes')

    seeds = [derive_seed(cfg.seed, r) for r in range(cfg.n_reps)]
    if cfg.resample_population:
        def replicate(seed):
            resampled = population_factory(derive_seed(seed, STREAM_POPULATION))
            return run_deployment_replicate(resampled, cfg, seed)
    else:
        actual = _auroc(population.sorted_batch)

        def replicate(seed):
            return run_deployment_replicate(population, cfg, seed, actual)

    replicates = map_replicates(replicate, seeds, workers)
    undefined = sum(r.observed is None for r in replicates)
    if undefined:
        logger.warning(
            f'p_t={cfg.p_t}, p_withhold={cfg.p_withhold}: observed AUROC undefined '
            f'in {undefined} of {cfg.n_reps} replicates'
        )
    return replicates


def summarize_replicates(replicates: Sequence[DeploymentReplicate]) -> DeploymentSummary:
    fractions = np.sort([r.observed_fraction for r in replicates])
    return DeploymentSummary(
        actual=summarize(r.actual for r in replicates),
        observed=summarize(r.observed for r in replicates),
        weighted=summarize(r.weighted for r in replicates),
        mean_observed_fraction=float(fractions.mean()),
    )
