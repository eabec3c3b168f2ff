"""Deterministic replica-parallel execution.

Work is split into fixed-size index blocks that do not depend on the number
of threads; each replica seeds itself from its own index, so output is
bit-identical for any thread count. The compiled kernels release the GIL.
"""

import os
from concurrent.futures import ThreadPoolExecutor

BLOCK = 64


def default_threads():
    env = os.environ.get("MDPSIM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_replicas(fn, n, threads=None):
    """Call ``fn(i)`` for ``i in range(n)`` and return results in index order."""
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or n <= BLOCK:
        return [fn(i) for i in range(n)]

    def block(start):
        return [fn(i) for i in range(start, min(start + BLOCK, n))]

    out = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for chunk in pool.map(block, range(0, n, BLOCK)):
            out.extend(chunk)
    return out
