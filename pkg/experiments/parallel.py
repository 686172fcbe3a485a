"""Ordered fan-out of independent replicates."""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

from django.conf import settings

T = TypeVar('T')
R = TypeVar('R')

DEFAULT_WORKERS = getattr(settings, 'SELECTION_EVAL_WORKERS', 1)


def map_replicates(fn: Callable[[T], R], items: Sequence[T], workers: int = DEFAULT_WORKERS) -> List[R]:
    """Apply fn to every item; results come back in item order whatever the worker count."""
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
