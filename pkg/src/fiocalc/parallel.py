"""Thread-pool helper with deterministic result ordering.

Results are always gathered in submission order, so the reduction order
(and therefore every report byte) is independent of the thread count.
The default comes from FIOCALC_THREADS when set.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_threads = 1


def default_threads() -> int:
    env = os.environ.get("FIOCALC_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def set_threads(n: int | None) -> None:
    global _threads
    _threads = max(1, n if n is not None else default_threads())


def get_threads() -> int:
    return _threads


def parallel_map(fn, items):
    items = list(items)
    if _threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(_threads, len(items))) as pool:
        return list(pool.map(fn, items))
