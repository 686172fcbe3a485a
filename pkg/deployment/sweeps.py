"""
Parameter sweeps over the deployment simulator.

Row i of a sweep runs its replicates from derive_seed(seed, stream, i),
where stream identifies the swept parameter, so a row does not depend on
the other grid values or on the worker count.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from evaluation.exceptions import InvalidParameterError
from experiments.aggregation import PointInterval
from experiments.parallel import DEFAULT_WORKERS
from experiments.reports import frame_to_csv
from experiments.runner import Estimator
from synthetic.seeding import STREAM_SWEEP_PT, STREAM_SWEEP_WITHHOLD, SeedLike, derive_seed

from .populations import PopulationFactory, ScoredPopulation
from .simulation import DEFAULT_SWEEP_REPS, DeploymentConfig, simulate_deployment, summarize_replicates

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    'swept_param', 'param_value', 'estimator', 'mean', 'lo', 'hi', 'mean_observed_fraction', 'n_undefined',
]

DEFAULT_P_WITHHOLD = 0.05
DEFAULT_P_T = 0.9


class SweepParam(Enum):
    P_T = 'p_t'
    P_WITHHOLD = 'p_withhold'


@dataclass(frozen=True)
class SweepRow:
    swept_param: SweepParam
    param_value: float
    actual: PointInterval
    observed: PointInterval
    weighted: PointInterval
    mean_observed_fraction: float

    def interval(self, estimator: Estimator) -> PointInterval:
        return getattr(self, estimator.value)


def default_pt_grid() -> List[float]:
    """0.99 down to 0.51 in steps of 0.02."""
    return [round(0.99 - 0.02 * i, 2) for i in range(25)]


def default_withhold_grid() -> List[float]:
    """0.99, 0.9 down to 0.2 linearly, then 16 log-spaced values from 0.1 to 0.01."""
    linear = np.round(np.linspace(0.9, 0.2, 8), 2)
    log_spaced = np.geomspace(0.1, 0.01, 16)
    return [0.99] + [float(v) for v in linear] + [float(v) for v in log_spaced]


def _run_row(
    population: ScoredPopulation,
    param: SweepParam,
    value: float,
    cfg: DeploymentConfig,
    population_factory: Optional[PopulationFactory],
    workers: int,
) -> SweepRow:
    summary = summarize_replicates(simulate_deployment(population, cfg, population_factory, workers))
    logger.debug(
        f'{param.value}={value}: observed {summary.observed.format(3)}, weighted {summary.weighted.format(3)}'
    )
    return SweepRow(
        swept_param=param,
        param_value=float(value),
        actual=summary.actual,
        observed=summary.observed,
        weighted=summary.weighted,
        mean_observed_fraction=summary.mean_observed_fraction,
    )


def sweep_p_t(
    population: ScoredPopulation,
    values: Optional[Sequence[float]] = None,
    p_withhold: float = DEFAULT_P_WITHHOLD,
    n_reps: int = DEFAULT_SWEEP_REPS,
    seed: SeedLike = 0,
    population_factory: Optional[PopulationFactory] = None,
    resample_population: bool = False,
    workers: int = DEFAULT_WORKERS,
) -> List[SweepRow]:
    values = default_pt_grid() if values is None else list(values)
    if not values:
        raise InvalidParameterError('p_t grid is empty')
    if any(not 0.5 < v < 1.0 for v in values):
        raise InvalidParameterError('p_t grid values must lie in (0.5, 1)')
    if any(a <= b for a, b in zip(values, values[1:])):
        raise InvalidParameterError('p_t grid must be strictly descending')

    rows = []
    for i, value in enumerate(values):
        cfg = DeploymentConfig(value, p_withhold, n_reps, derive_seed(seed, STREAM_SWEEP_PT, i), resample_population)
        rows.append(_run_row(population, SweepParam.P_T, value, cfg, population_factory, workers))
    logger.info(f'p_t sweep: {len(rows)} rows of {n_reps} replicates at p_withhold={p_withhold}')
    return rows


def sweep_p_withhold(
    population: ScoredPopulation,
    values: Optional[Sequence[float]] = None,
    p_t: float = DEFAULT_P_T,
    n_reps: int = DEFAULT_SWEEP_REPS,
    seed: SeedLike = 0,
    population_factory: Optional[PopulationFactory] = None,
    resample_population: bool = False,
    workers: int = DEFAULT_WORKERS,
) -> List[SweepRow]:
    values = default_withhold_grid() if values is None else list(values)
    if not values:
        raise InvalidParameterError('p_withhold grid is empty')
    if any(not 0.0 < v <= 1.0 for v in values):
        raise InvalidParameterError('p_withhold grid values must lie in (0, 1]')

    rows = []
    for i, value in enumerate(values):
        cfg = DeploymentConfig(p_t, value, n_reps, derive_seed(seed, STREAM_SWEEP_WITHHOLD, i), resample_population)
        rows.append(_run_row(population, SweepParam.P_WITHHOLD, value, cfg, population_factory, workers))
    logger.info(f'p_withhold sweep: {len(rows)} rows of {n_reps} replicates at p_t={p_t}')
    return rows


def sweep_rows(rows: Sequence[SweepRow]) -> List[Dict]:
    records = []
    for row in rows:
        for estimator in Estimator:
            interval = row.interval(estimator)
            records.append({
                'swept_param': row.swept_param.value,
                'param_value': row.param_value,
                'estimator': estimator.value,
                'mean': interval.mean,
                'lo': interval.lo,
                'hi': interval.hi,
                'mean_observed_fraction': row.mean_observed_fraction,
                'n_undefined': interval.n_undefined,
            })
    return records


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    return frame_to_csv(pd.DataFrame(sweep_rows(rows), columns=SWEEP_COLUMNS))
