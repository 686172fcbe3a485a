"""
Table 1 grid and calibration tables built from ScenarioResults.

CSV output carries 6 significant digits, the human readable grid 2
decimals. Both are deterministic given the results.
"""

import io
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd
from django.template.loader import render_to_string

from evaluation.metrics import ALL_METRICS, MetricName
from synthetic.dgp import Scenario

from .exceptions import MissingScenarioError
from .runner import Estimator, ScenarioResult

TABLE1_COLUMNS = ['scenario', 'metric', 'estimator', 'mean', 'lo', 'hi', 'n_undefined']
CALIBRATION_COLUMNS = [
    'scenario', 'estimator', 'bin_index', 'bin_lo', 'bin_hi',
    'mean_pred', 'prevalence', 'weight_mass', 'lo', 'hi',
]

CSV_FLOAT_FORMAT = '%.6g'


def frame_to_csv(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=CSV_FLOAT_FORMAT, na_rep='', lineterminator='\n')
    return buffer.getvalue()


@dataclass(frozen=True)
class Table1Report:
    """Metric x scenario x estimator grid, each cell 'mean [lo, hi]'."""
    results: Tuple[ScenarioResult, ...]
    metrics: Tuple[MetricName, ...]

    def rows(self) -> List[Dict]:
        rows = []
        for result in self.results:
            for metric in self.metrics:
                triplet = result.triplet(metric)
                for estimator in Estimator:
                    interval = triplet.interval(estimator)
                    rows.append({
                        'scenario': result.spec.slug,
                        'metric': metric.value,
                        'estimator': estimator.value,
                        'mean': interval.mean,
                        'lo': interval.lo,
                        'hi': interval.hi,
                        'n_undefined': interval.n_undefined,
                    })
        return rows

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows(), columns=TABLE1_COLUMNS)

    def to_csv(self) -> str:
        return frame_to_csv(self.to_frame())

    def cell(self, result: ScenarioResult, metric: MetricName, estimator: Estimator) -> str:
        triplet = result.triplet(metric)
        text = triplet.interval(estimator).format(2)
        return f'{text} *' if triplet.flagged else text

    def to_text(self) -> str:
        headers = [f'Scenario {r.spec.scenario.number} ({r.spec.slug})' for r in self.results]
        rows = []
        for metric in self.metrics:
            for estimator in Estimator:
                rows.append({
                    'metric': metric.label if estimator is Estimator.ACTUAL else '',
                    'estimator': estimator.value.capitalize(),
                    'cells': [self.cell(r, metric, estimator) for r in self.results],
                    'last_of_metric': estimator is Estimator.WEIGHTED,
                })
        cell_width = max([len(h) for h in headers] + [len(c) for row in rows for c in row['cells']]) + 2
        notes = []
        if any(r.flagged_metrics for r in self.results):
            notes.append('* more than 10% of replicates undefined for this metric')
        first = self.results[0]
        notes.append(
            f'n={first.n}, replicates={first.n_reps}, threshold={first.threshold}; '
            f'intervals are 2.5-97.5 percentiles across replicates'
        )
        context = {
            'title': 'Discrimination performance metrics across selection scenarios',
            'headers': headers,
            'rows': rows,
            'notes': notes,
            'metric_width': 13,
            'estimator_width': 11,
            'cell_width': cell_width,
            'rule': '-' * (24 + cell_width * len(headers)),
        }
        return render_to_string('experiments/table1.txt', context)


def table1_report(
    results: Iterable[ScenarioResult],
    scenarios: Sequence[Scenario] = tuple(Scenario),
    metrics: Optional[Sequence[MetricName]] = None,
) -> Table1Report:
    """Order results by scenario; every requested scenario must be present."""
    by_scenario = {r.spec.scenario: r for r in results}
    missing = [s.value for s in scenarios if s not in by_scenario]
    if missing:
        raise MissingScenarioError(f'missing scenario: {", ".join(missing)}')
    ordered = tuple(by_scenario[s] for s in scenarios)
    if metrics is None:
        present = {t.metric_name for t in ordered[0].triplets}
        metrics = [m for m in ALL_METRICS if m in present]
    return Table1Report(ordered, tuple(metrics))


def calibration_rows(results: Iterable[ScenarioResult]) -> List[Dict]:
    rows = []
    for result in results:
        for estimator in Estimator:
            for summary in result.calibration[estimator]:
                rows.append({
                    'scenario': result.spec.slug,
                    'estimator': estimator.value,
                    'bin_index': summary.bin_index,
                    'bin_lo': summary.bin_lo,
                    'bin_hi': summary.bin_hi,
                    'mean_pred': summary.mean_pred,
                    'prevalence': summary.prevalence.mean,
                    'weight_mass': summary.weight_mass,
                    'lo': summary.prevalence.lo,
                    'hi': summary.prevalence.hi,
                })
    return rows


def calibration_csv(results: Iterable[ScenarioResult]) -> str:
    return frame_to_csv(pd.DataFrame(calibration_rows(results), columns=CALIBRATION_COLUMNS))
