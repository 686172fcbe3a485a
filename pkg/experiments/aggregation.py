"""
Replicate aggregation: arithmetic mean plus a percentile interval.

Percentiles use linear interpolation between closest ranks (numpy's
default 'linear' method). Values are sorted before any reduction so the
result does not depend on the order replicates finished in.
"""

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from evaluation.exceptions import InvalidParameterError

LO_PERCENTILE = 2.5
HI_PERCENTILE = 97.5


@dataclass(frozen=True)
class PointInterval:
    mean: Optional[float]
    lo: Optional[float]
    hi: Optional[float]
    n_values: int = 0
    n_undefined: int = 0

    @classmethod
    def undefined(cls, n_undefined: int) -> 'PointInterval':
        return cls(None, None, None, 0, n_undefined)

    @property
    def is_defined(self) -> bool:
        return self.mean is not None

    @property
    def width(self) -> Optional[float]:
        return None if not self.is_defined else self.hi - self.lo

    def format(self, digits: int = 2) -> str:
        if not self.is_defined:
            return 'undefined'
        return f'{self.mean:.{digits}f} [{self.lo:.{digits}f}, {self.hi:.{digits}f}]'


def percentile_interval(values: Iterable[float], lo_pct: float = LO_PERCENTILE, hi_pct: float = HI_PERCENTILE) -> PointInterval:
    if not 0.0 <= lo_pct < hi_pct <= 100.0:
        raise InvalidParameterError(f'need 0 <= lo_pct < hi_pct <= 100, got ({lo_pct}, {hi_pct})')
    data = np.sort(np.asarray(list(values), dtype=np.float64))
    if data.size == 0:
        raise InvalidParameterError('percentile_interval needs at least one value')
    lo, hi = np.percentile(data, [lo_pct, hi_pct])
    return PointInterval(float(data.mean()), float(lo), float(hi), n_values=int(data.size))


def summarize(values: Iterable[Optional[float]], lo_pct: float = LO_PERCENTILE, hi_pct: float = HI_PERCENTILE) -> PointInterval:
    """Interval over the defined values; None entries are counted as undefined."""
    values = list(values)
    defined = [v for v in values if v is not None]
    n_undefined = len(values) - len(defined)
    if not defined:
        return PointInterval.undefined(n_undefined)
    interval = percentile_interval(defined, lo_pct, hi_pct)
    return PointInterval(interval.mean, interval.lo, interval.hi, interval.n_values, n_undefined)
