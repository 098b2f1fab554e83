"""Counter-based random streams and deterministic block-parallel mapping.

Every random draw in the package comes from a Philox generator keyed by
``(seed, stream ids...)``.  Work over many paths is cut into fixed-size
blocks; block ``b`` of an experiment tagged ``tag`` always uses the stream
``(seed, tag, b)``, so the output never depends on how many worker threads
process the blocks.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

BLOCK_SIZE = 4096

_default_threads = 1


def set_default_threads(n: int) -> None:
    global _default_threads
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _default_threads = int(n)


def default_threads() -> int:
    return _default_threads


def _as_id(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("stream ids must be nonnegative")
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed: int, *ids) -> np.random.Generator:
    """Return the generator for stream ``ids`` under the global ``seed``."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(_as_id(i) for i in ids))
    return np.random.Generator(np.random.Philox(seq))


def block_bounds(n: int, block: int = BLOCK_SIZE) -> list[tuple[int, int]]:
    return [(lo, min(lo + block, n)) for lo in range(0, n, block)]


def map_blocks(
    fn: Callable[[np.random.Generator, int], object],
    n: int,
    seed: int,
    tag,
    threads: int | None = None,
    block: int = BLOCK_SIZE,
) -> list:
    """Run ``fn(rng, size)`` on every block and return results in block order."""
    bounds = block_bounds(n, block)
    threads = threads or _default_threads

    def run(b: int):
        lo, hi = bounds[b]
        return fn(stream(seed, tag, b), hi - lo)

    if threads == 1 or len(bounds) <= 1:
        return [run(b) for b in range(len(bounds))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, range(len(bounds))))


def concat_blocks(results: Sequence):
    """Concatenate per-block arrays (or tuples of arrays) along axis 0."""
    if not results:
        return np.empty(0)
    first = results[0]
    if isinstance(first, tuple):
        return tuple(np.concatenate([r[i] for r in results]) for i in range(len(first)))
    return np.concatenate(results)


def parallel_samples(sampler, n: int, seed: int, tag, threads: int | None = None,
                     block: int = BLOCK_SIZE):
    """Draw ``n`` samples from ``sampler(rng, size)`` deterministically."""
    return concat_blocks(map_blocks(sampler, n, seed, tag, threads=threads, block=block))
