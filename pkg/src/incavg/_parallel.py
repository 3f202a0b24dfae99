from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def derive_seed(seed: int, *path: int) -> int:
    """Independent child seed for ``path`` under ``seed`` (numpy SeedSequence spawn keys)."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


def thread_count() -> int:
    raw = os.environ.get("INCAVG_THREADS", "").strip()
    if raw:
        n = int(raw)
        if n < 1:
            raise ValueError("INCAVG_THREADS must be >= 1")
        return n
    return min(8, os.cpu_count() or 1)


def pmap(fn, items) -> list:
    """Ordered map, threaded up to ``INCAVG_THREADS`` workers."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
