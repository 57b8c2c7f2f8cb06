from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

from slicemotion import state

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(
    func: Callable[[T], R],
    items: Iterable[T],
    *,
    max_workers: int | None = None,
) -> list[R]:
    """Apply func to every item, returning results in input order.

    The worker count only changes scheduling, never results.

    """
    items = list(items)
    if max_workers is None:
        max_workers = state.MAX_WORKERS

    if max_workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(func, items))
