"""Seeded, sharded Monte Carlo execution.

Work is split into a fixed number of shards, each with its own child of one
SeedSequence, so merged results depend on the seed and the shard count but
never on how many threads executed them.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, Tuple, TypeVar, Union

import numpy as np

from relnet.exceptions import DomainError

logger = logging.getLogger(__name__)

T = TypeVar("T")


def shard_generators(seed: Union[int, Sequence[int]], shards: int) -> List[np.random.Generator]:
    if shards < 1:
        raise DomainError(f"shard count must be positive, got {shards}")
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(shards)]


def split_samples(samples: int, shards: int) -> List[int]:
    """Per-shard sample counts; the first `samples % shards` shards take one extra."""
    base, extra = divmod(samples, shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def run_sharded(
    task: Callable[[int, np.random.Generator], T],
    seed: Union[int, Sequence[int]],
    shards: int,
    threads: int = 1,
) -> List[T]:
    """Run `task(shard_index, rng)` for every shard, results in shard order."""
    generators = shard_generators(seed, shards)
    if threads <= 1:
        return [task(i, rng) for i, rng in enumerate(generators)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(shards), generators))


def batch_means(values: Sequence, weights: Sequence[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and standard error across shards, one shard per row."""
    values = np.asarray(values, dtype=float)
    shards = values.shape[0]
    weights = np.ones(shards) if weights is None else np.asarray(weights, dtype=float)
    mean = np.average(values, axis=0, weights=weights)
    if shards < 2:
        logger.warning("standard error needs at least two shards; reporting 0")
        return mean, np.zeros_like(mean)
    spread = np.sqrt(np.average((values - mean) ** 2, axis=0, weights=weights) * shards / (shards - 1))
    return mean, spread / np.sqrt(shards)
