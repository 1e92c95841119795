import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    """Worker cap; ``PPI_THREADS`` overrides the CPU count."""
    env = os.environ.get("PPI_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def ordered_map(fn, items):
    """``[fn(x) for x in items]``, possibly concurrent, always in input order."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
