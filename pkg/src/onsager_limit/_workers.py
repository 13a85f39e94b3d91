import os
from concurrent.futures import ThreadPoolExecutor


def worker_count():
    """Worker cap from ONSAGER_THREADS (default: all cores)."""
    raw = os.environ.get("ONSAGER_THREADS", "").strip()
    ncpu = os.cpu_count() or 1
    if not raw:
        return ncpu
    try:
        n = int(raw)
    except ValueError:
        return ncpu
    return max(1, min(n, ncpu))


def parallel_map(fn, items):
    """Ordered map; results do not depend on the worker count."""
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
