"""Deterministic worker pool.

Results are always returned in submission order and every reduction is done
by the caller in that order, so the worker count changes wall time only.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional

__all__ = ["worker_count", "ordered_map"]


def worker_count(override: Optional[int] = None) -> int:
    if override is not None:
        return max(1, int(override))
    raw = os.environ.get("OSCILLAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"OSCILLAB_THREADS must be an integer, got {raw!r}") from None


def ordered_map(func: Callable, items: Iterable, workers: Optional[int] = None) -> List:
    items = list(items)
    w = worker_count(workers)
    if w == 1 or len(items) < 2:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=w) as pool:
        return list(pool.map(func, items))
