"""Fixed-partition parallel execution with per-chunk random streams.

Work is cut into chunks whose boundaries depend only on the problem size,
and chunk ``i`` always draws from child ``i`` of the run's SeedSequence, so
results do not depend on how many workers execute the chunks.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_default_workers = 1


def resolve_workers(workers=None) -> int:
    if workers is None:
        return _default_workers
    if workers == "auto":
        return os.cpu_count() or 1
    workers = int(workers)
    if workers < 1:
        raise ValueError("workers must be >= 1 or 'auto'")
    return workers


def set_default_workers(workers) -> None:
    global _default_workers
    _default_workers = resolve_workers(workers)


def chunk_bounds(n: int, size: int):
    return [(a, min(a + size, n)) for a in range(0, n, size)]


def map_chunks(fn, n_items: int, chunk_size: int, seed: int, workers=None):
    """Call ``fn(start, stop, rng)`` on each chunk; results in chunk order."""
    bounds = chunk_bounds(n_items, chunk_size)
    children = np.random.SeedSequence(seed).spawn(len(bounds))
    rngs = [np.random.Generator(np.random.PCG64(s)) for s in children]
    tasks = [(a, b, r) for (a, b), r in zip(bounds, rngs)]
    nw = min(resolve_workers(workers), max(1, len(tasks)))
    if nw == 1:
        return [fn(*t) for t in tasks]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(lambda t: fn(*t), tasks))


def as_seed(rng_or_seed) -> int:
    """Integer seed from an int or a Generator (drawing one value from it)."""
    if isinstance(rng_or_seed, np.random.Generator):
        return int(rng_or_seed.integers(2**63))
    if rng_or_seed is None:
        return 0
    return int(rng_or_seed)
