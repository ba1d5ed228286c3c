"""Worker-pool helpers.

Simulation and estimation parallelize over fixed-size path blocks; results
are written to disjoint slices, so the numbers cannot depend on the worker
count.  FRACTOID_THREADS caps the pool; default is the available
parallelism.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

BLOCK_SIZE = 4096


def worker_count() -> int:
    env = os.environ.get("FRACTOID_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            n = 1
        return max(1, n)
    return os.cpu_count() or 1


def iter_blocks(n_items: int, block_size: int = BLOCK_SIZE):
    for start in range(0, n_items, block_size):
        yield start, min(start + block_size, n_items)


def map_blocks(fn, n_items: int, block_size: int = BLOCK_SIZE) -> None:
    """Run fn(start, stop) over fixed-size blocks, possibly threaded.

    fn must write only to disjoint output slices; return values are ignored.
    """
    blocks = list(iter_blocks(n_items, block_size))
    workers = min(worker_count(), len(blocks))
    if workers <= 1:
        for start, stop in blocks:
            fn(start, stop)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, start, stop) for start, stop in blocks]
        for fut in futures:
            fut.result()
