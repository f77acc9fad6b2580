"""Deterministic per-block random streams.

Paths are split into fixed-size blocks; every block draws from its own
generator keyed by ``(seed, stream, block)``.  Results are therefore identical
whatever the number of worker threads.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_SIZE = 4096


def block_sizes(paths, block_size=BLOCK_SIZE):
    full, rest = divmod(int(paths), block_size)
    return [block_size] * full + ([rest] if rest else [])


def block_rng(seed, stream, block):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


def default_threads():
    return os.cpu_count() or 1


def map_blocks(fn, paths, seed, stream=0, threads=None):
    """Call ``fn(rng, size)`` once per block and return the results in block order."""
    sizes = block_sizes(paths)
    jobs = [(block_rng(seed, stream, i), n) for i, n in enumerate(sizes)]
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(jobs) == 1:
        return [fn(rng, n) for rng, n in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
