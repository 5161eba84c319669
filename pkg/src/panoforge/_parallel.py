import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "PANOFORGE_THREADS"


def max_workers() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def map_ordered(fn, items):
    """``list(map(fn, items))`` on a capped thread pool; result order is input order."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
