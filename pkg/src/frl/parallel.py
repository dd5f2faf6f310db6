"""Thread fan-out with a fixed reduction order.

FRL_THREADS caps the number of worker threads (default 1).  Results are
always returned in submission order, so sums taken over them do not depend
on scheduling and repeated runs are bit-identical.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    raw = os.environ.get("FRL_THREADS", "1").strip()
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """[fn(x) for x in items], evaluated on up to ``threads`` threads."""
    items = list(items)
    n = thread_count() if threads is None else max(1, threads)
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))


def ordered_sum(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None):
    """Sum of fn(x) over items, reduced left to right in item order."""
    parts = ordered_map(fn, items, threads)
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total
