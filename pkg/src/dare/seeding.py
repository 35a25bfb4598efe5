"""Deterministic per-trial seeds."""
from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def derive_seed(global_seed: int, name: str, *index: int) -> np.random.SeedSequence:
    """Seed sequence keyed on ``(global_seed, name, index...)``.

    Independent of call order, so trials can run in any order or thread.
    """
    key = [int(global_seed) & 0xFFFFFFFF, zlib.crc32(name.encode())]
    key.extend(int(i) for i in index)
    return np.random.SeedSequence(key)


def trial_rng(global_seed: int, name: str, *index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(global_seed, name, *index))


def trial_int(global_seed: int, name: str, *index: int) -> int:
    return int(derive_seed(global_seed, name, *index).generate_state(1)[0])


def map_trials(fn, items, threads: int = 1):
    """``[fn(i) for i in items]``, optionally on a thread pool; order preserved."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
