import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

# Chunk boundaries depend only on the problem size, never on the worker
# count, so every chunk sees identical inputs however it is scheduled.
CHUNK = 4096


def resolve_threads(threads):
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return int(threads)


def chunk_bounds(size, chunk=CHUNK):
    return [(lo, min(lo + chunk, size)) for lo in range(0, size, chunk)]


def chunked_map(func, size, threads=None, chunk=CHUNK):
    """Apply ``func(lo, hi)`` over fixed chunks of ``range(size)`` and
    concatenate the array results in chunk order."""
    bounds = chunk_bounds(size, chunk)
    if not bounds:
        return np.empty(0)
    workers = min(resolve_threads(threads), len(bounds))
    if workers == 1:
        parts = [func(lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: func(*b), bounds))
    return np.concatenate(parts)
