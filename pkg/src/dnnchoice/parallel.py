import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "DNNCHOICE_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_map(fn, items, workers: int | None = None) -> list:
    """Map ``fn`` over ``items``; results come back in input order regardless of
    completion order."""
    items = list(items)
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
