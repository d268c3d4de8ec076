"""Counter-based random streams for reproducible, order-independent ensembles.

Sample ``k`` of a run with master seed ``m`` always draws from
``Philox(SeedSequence([m, k]))``, so results do not depend on how samples
are batched or scheduled across threads.
"""

import os

import numpy as np


def stream(master, index):
    """Generator for sample ``index`` under master seed ``master``."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return np.random.Generator(np.random.Philox(ss))


def uniforms(master, indices, n):
    """(len(indices), n) array of U[0,1) draws, row k from stream(master, k)."""
    out = np.empty((len(indices), n))
    for row, k in enumerate(indices):
        out[row] = stream(master, k).random(n)
    return out


def thread_count():
    """Worker cap from DECOHIST_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("DECOHIST_THREADS", "1")))
    except ValueError:
        return 1


def pairwise_sum(values):
    """Sum along axis 0 by fixed-shape pairwise recursion (bit-stable)."""
    values = np.asarray(values)
    n = values.shape[0]
    if n == 0:
        return np.zeros(values.shape[1:], dtype=values.dtype)
    if n <= 8:
        total = values[0].copy()
        for v in values[1:]:
            total = total + v
        return total
    half = n // 2
    return pairwise_sum(values[:half]) + pairwise_sum(values[half:])
