"""Addressable random substreams.

Every random draw in the library flows through a :class:`Stream`, i.e. a
Philox (counter-based) generator keyed by ``(seed, stream_id)``.  Campaigns
split their work into fixed-size chunks, one stream per chunk, so results
do not depend on how many worker threads are used.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

CHUNK = 1 << 14


class Stream:
    """Independent random substream addressed by ``(seed, stream_id)``."""

    __slots__ = ("seed", "stream_id", "gen")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.gen = np.random.Generator(np.random.Philox(ss))

    def child(self, stream_id: int) -> "Stream":
        # children live in a disjoint key space below the parent id
        ss_key = (self.stream_id, int(stream_id))
        s = Stream.__new__(Stream)
        s.seed = self.seed
        s.stream_id = int(stream_id)
        s.gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=self.seed, spawn_key=ss_key))
        )
        return s

    def __repr__(self):
        return f"Stream(seed={self.seed}, stream_id={self.stream_id})"


def as_stream(stream) -> Stream:
    """Coerce an int seed, a Generator or a Stream into a Stream-like object."""
    if isinstance(stream, Stream):
        return stream
    if isinstance(stream, (int, np.integer)):
        return Stream(int(stream))
    if isinstance(stream, np.random.Generator):
        s = Stream.__new__(Stream)
        s.seed, s.stream_id, s.gen = -1, -1, stream
        return s
    raise TypeError(f"cannot build a random stream from {type(stream).__name__}")


def thread_count() -> int:
    try:
        n = int(os.environ.get("CONDWALK_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def chunk_sizes(total: int, chunk: int = CHUNK) -> list[int]:
    full, rest = divmod(int(total), chunk)
    return [chunk] * full + ([rest] if rest else [])


def map_chunks(
    fn: Callable[[int, Stream], T],
    total: int,
    seed: int,
    *,
    base_id: int = 0,
    chunk: int = CHUNK,
    threads: int | None = None,
) -> list[T]:
    """Run ``fn(size, stream)`` over fixed chunks of ``total`` draws.

    Chunk ``i`` always receives ``Stream(seed, base_id + i)``; results come
    back in chunk order regardless of the number of threads.
    """
    sizes = chunk_sizes(total, chunk)
    jobs = [(size, Stream(seed, base_id + i)) for i, size in enumerate(sizes)]
    threads = thread_count() if threads is None else max(1, int(threads))
    if threads == 1 or len(jobs) <= 1:
        return [fn(size, s) for size, s in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def concat(parts: Sequence[np.ndarray]) -> np.ndarray:
    if not parts:
        return np.empty(0)
    return np.concatenate(parts)
