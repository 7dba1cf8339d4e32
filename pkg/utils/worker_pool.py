"""
Chunked, order-preserving map over a thread pool.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, TypeVar

from config import Config

T = TypeVar("T")


def chunk_slices(n_items: int, chunk_size: int = Config.CHUNK_SIZE) -> List[slice]:
    """Fixed partition of range(n_items); independent of the worker count."""
    return [slice(start, min(start + chunk_size, n_items)) for start in range(0, n_items, chunk_size)]


def map_chunks(func: Callable[[slice], T], n_items: int, workers: int = 1,
               chunk_size: int = Config.CHUNK_SIZE) -> List[T]:
    """
    Apply func to consecutive slices of range(n_items).

    Results come back in slice order whatever the number of workers, so any
    reduction over them is reproducible bit for bit.
    """
    slices = chunk_slices(n_items, chunk_size)
    if workers <= 1 or len(slices) <= 1:
        return [func(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, slices))
