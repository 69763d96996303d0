"""Deterministic splittable random streams for parallel Monte Carlo.

Every replica (or fixed-size shard of replicas) gets its own counter-based
stream keyed by (master_seed, index).  Streams are independent of scheduling
order and of the number of worker threads, so a run is bit-reproducible from
the master seed alone.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "uniform_starts"]

_MASK64 = (1 << 64) - 1


def stream(master_seed: int, index: int) -> np.random.Generator:
    """Return the stream for `index` under `master_seed`.

    Uses Philox keyed by the (seed, index) pair; distinct keys give
    statistically independent streams regardless of creation order.
    """
    key = np.array([master_seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniform_starts(master_seed: int, n: int, base_index: int = 0) -> np.ndarray:
    """Uniform(0,1) draws, one per replica, each from its own stream.

    Replica r consumes only the first variate of stream (master_seed,
    base_index + r), so adding replicas never perturbs existing ones.
    """
    out = np.empty(n)
    for r in range(n):
        out[r] = stream(master_seed, base_index + r).random()
    return out
