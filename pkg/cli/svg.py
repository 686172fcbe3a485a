"""
Geometry for the SVG figures.

Everything numeric happens here; the templates under templates/cli only
place the precomputed coordinates. Pixel values are rounded to one
decimal so the output is byte-stable.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from django.template.loader import render_to_string

from deployment.sweeps import SweepRow
from experiments.runner import Estimator, ScenarioResult

ESTIMATOR_COLORS = {
    Estimator.ACTUAL: '#4d4d4d',
    Estimator.OBSERVED: '#d95f02',
    Estimator.WEIGHTED: '#1b9e77',
}

PANEL_MARGIN = {'left': 56, 'right': 120, 'top': 36, 'bottom': 48}


def _px(value: float) -> str:
    return f'{value:.1f}'


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    pixel_lo: float
    pixel_hi: float

    def __call__(self, value: float) -> float:
        return self.pixel_lo + (value - self.lo) / (self.hi - self.lo) * (self.pixel_hi - self.pixel_lo)

    def ticks(self, values: Sequence[float], digits: int = 1) -> List[Dict]:
        return [{'pos': _px(self(v)), 'label': f'{v:.{digits}f}'} for v in values]


def _points(xs: Sequence[float], ys: Sequence[float], x: Axis, y: Axis) -> str:
    return ' '.join(f'{_px(x(a))},{_px(y(b))}' for a, b in zip(xs, ys))


def _band(xs, lows, highs, x: Axis, y: Axis) -> str:
    upper = _points(xs, highs, x, y)
    lower = _points(list(reversed(xs)), list(reversed(lows)), x, y)
    return f'{upper} {lower}'


def _frame(left: float, top: float, width: float, height: float, title: str, x_label: str, y_label: str) -> Dict:
    return {
        'left': _px(left),
        'top': _px(top),
        'width': _px(width),
        'height': _px(height),
        'right': _px(left + width),
        'bottom': _px(top + height),
        'center_x': _px(left + width / 2),
        'center_y': _px(top + height / 2),
        'title_y': _px(top - 12),
        'tick_end': _px(top + height + 5),
        'tick_label_y': _px(top + height + 18),
        'x_label_y': _px(top + height + 36),
        'y_tick_start': _px(left - 5),
        'y_tick_label_x': _px(left - 8),
        'y_label_x': _px(left - 40),
        'title': title,
        'x_label': x_label,
        'y_label': y_label,
    }


def _legend(frame_top: float, frame_left: float, frame_width: float) -> List[Dict]:
    return [
        {
            'name': estimator.value.capitalize(),
            'color': ESTIMATOR_COLORS[estimator],
            'x': _px(frame_left + frame_width + 16),
            'text_x': _px(frame_left + frame_width + 40),
            'y': _px(frame_top + 16 + 20 * i),
            'text_y': _px(frame_top + 20 + 20 * i),
        }
        for i, estimator in enumerate(Estimator)
    ]


def calibration_panel(result: ScenarioResult, left: float = PANEL_MARGIN['left'],
                      top: float = PANEL_MARGIN['top'], size: float = 320) -> Dict:
    x = Axis(0.0, 1.0, left, left + size)
    y = Axis(0.0, 1.0, top + size, top)
    panel = _frame(
        left, top, size, size,
        f'Scenario {result.spec.scenario.number}: {result.spec.scenario.title}',
        'Mean predicted probability', 'Observed prevalence',
    )
    ticks = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    panel['x_ticks'] = x.ticks(ticks)
    panel['y_ticks'] = y.ticks(ticks)
    panel['diagonal'] = _points([0.0, 1.0], [0.0, 1.0], x, y)
    panel['legend'] = _legend(top, left, size)

    series = []
    for estimator in Estimator:
        rows = [
            b for b in result.calibration[estimator]
            if b.mean_pred is not None and b.prevalence.is_defined
        ]
        xs = [b.mean_pred for b in rows]
        series.append({
            'name': estimator.value,
            'color': ESTIMATOR_COLORS[estimator],
            'line': _points(xs, [b.prevalence.mean for b in rows], x, y),
            'band': '',
            'bars': [
                {'x': _px(x(b.mean_pred)), 'y1': _px(y(b.prevalence.lo)), 'y2': _px(y(b.prevalence.hi))}
                for b in rows
            ],
            'dots': [{'x': _px(x(b.mean_pred)), 'y': _px(y(b.prevalence.mean))} for b in rows],
        })
    panel['series'] = series
    return panel


def render_calibration_svg(result: ScenarioResult) -> str:
    panel = calibration_panel(result)
    size = 320
    return render_to_string('cli/figure.svg', {
        'width': PANEL_MARGIN['left'] + size + PANEL_MARGIN['right'],
        'height': PANEL_MARGIN['top'] + size + PANEL_MARGIN['bottom'],
        'panels': [panel],
    })


def _value_range(rows: Sequence[SweepRow]) -> Tuple[float, float]:
    values = [
        v for row in rows for e in Estimator
        for v in (row.interval(e).lo, row.interval(e).hi) if v is not None
    ]
    if not values:
        return 0.0, 1.0
    lo, hi = min(values), max(values)
    pad = max(0.02, (hi - lo) * 0.08)
    return max(0.0, lo - pad), min(1.0, hi + pad)


def _nice_ticks(lo: float, hi: float, count: int = 5) -> List[float]:
    return [float(v) for v in np.round(np.linspace(lo, hi, count), 2)]


def sweep_panel(rows: Sequence[SweepRow], title: str, x_label: str,
                left: float, top: float, width: float, height: float, log_x: bool = False) -> Dict:
    values = [row.param_value for row in rows]
    transform = np.log10 if log_x else (lambda v: np.asarray(v, dtype=np.float64))
    tx = [float(v) for v in transform(values)]
    x_lo, x_hi = (max(tx), min(tx)) if len(set(tx)) > 1 else (tx[0] + 0.5, tx[0] - 0.5)
    x = Axis(x_lo, x_hi, left, left + width)
    y_lo, y_hi = _value_range(rows)
    y = Axis(y_lo, y_hi, top + height, top)

    panel = _frame(left, top, width, height, title, x_label, 'AUROC')
    x_tick_values = sorted(set(values), reverse=True)
    if len(x_tick_values) > 7:
        x_tick_values = [x_tick_values[i] for i in np.linspace(0, len(x_tick_values) - 1, 7).round().astype(int)]
    panel['x_ticks'] = [
        {'pos': _px(x(float(transform([v])[0]))), 'label': f'{v:.2g}' if log_x else f'{v:.2f}'}
        for v in x_tick_values
    ]
    panel['y_ticks'] = y.ticks(_nice_ticks(y_lo, y_hi), digits=2)
    panel['diagonal'] = ''
    panel['legend'] = _legend(top, left, width)

    series = []
    for estimator in Estimator:
        defined = [(t, row.interval(estimator)) for t, row in zip(tx, rows) if row.interval(estimator).is_defined]
        xs = [t for t, _ in defined]
        series.append({
            'name': estimator.value,
            'color': ESTIMATOR_COLORS[estimator],
            'line': _points(xs, [i.mean for _, i in defined], x, y),
            'band': _band(xs, [i.lo for _, i in defined], [i.hi for _, i in defined], x, y) if defined else '',
            'bars': [],
            'dots': [],
        })
    panel['series'] = series
    return panel


SweepColumn = Tuple[str, Sequence[SweepRow], Sequence[SweepRow]]


def render_sweep_grid_svg(columns: Sequence[SweepColumn],
                          p_withhold: Optional[float] = None, p_t: Optional[float] = None) -> str:
    """One column per population: the p_t sweep on top, the p_withhold sweep below."""
    width, height = 560, 260
    column_width = PANEL_MARGIN['left'] + width + PANEL_MARGIN['right']
    row_height = height + PANEL_MARGIN['top'] + PANEL_MARGIN['bottom']
    pt_title = 'AUROC over alert threshold p_t'
    withhold_title = 'AUROC over withholding probability p_withhold'
    if p_withhold is not None:
        pt_title += f' (p_withhold = {p_withhold:g})'
    if p_t is not None:
        withhold_title += f' (p_t = {p_t:g})'

    panels = []
    for j, (label, pt_rows, withhold_rows) in enumerate(columns):
        left, top = PANEL_MARGIN['left'] + j * column_width, PANEL_MARGIN['top']
        prefix = f'{label}: ' if label else ''
        panels.append(sweep_panel(pt_rows, prefix + pt_title, 'p_t', left, top, width, height))
        panels.append(sweep_panel(withhold_rows, prefix + withhold_title, 'p_withhold (log scale)',
                                  left, top + row_height, width, height, log_x=True))
    return render_to_string('cli/figure.svg', {
        'width': len(columns) * column_width,
        'height': 2 * row_height,
        'panels': panels,
    })


def render_sweep_svg(pt_rows: Sequence[SweepRow], withhold_rows: Sequence[SweepRow],
                     p_withhold: Optional[float] = None, p_t: Optional[float] = None) -> str:
    return render_sweep_grid_svg([('', pt_rows, withhold_rows)], p_withhold, p_t)
