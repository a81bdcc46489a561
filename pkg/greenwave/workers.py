"""
Worker-pool helpers behind --threads
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int) -> int:
    """0 means one worker per available CPU"""
    if threads < 0:
        raise ValueError(f"threads must be >= 0, got {threads}")
    if threads == 0:
        return max(1, os.cpu_count() or 1)
    return threads


def split_indices(count: int, parts: int) -> List[np.ndarray]:
    """Contiguous index chunks, at most `parts` of them, none empty"""
    parts = max(1, min(parts, count))
    return [chunk for chunk in np.array_split(np.arange(count), parts)]


def chunked_map(
    fn: Callable[[T], R], items: Sequence[T], threads: int = 1
) -> List[R]:
    """
    Apply fn to every item, preserving order. Work runs inline for a
    single worker so results do not depend on the pool.
    """
    workers = resolve_threads(threads)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
