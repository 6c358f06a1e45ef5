"""Shared worker pool for k-grid sweeps.

Every solver in the toolkit is a pure function of immutable inputs, so a
sweep over wavenumbers is a plain map. One process-wide ThreadPoolExecutor
serves all of them; numpy and scipy release the GIL inside their kernels.
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from src.logging_config import get_logger

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_num_threads = 1
_executor: Optional[ThreadPoolExecutor] = None
_executor_lock = threading.Lock()


def configure_threads(n: int) -> None:
    """Resize the pool. Takes effect on the next map."""
    global _num_threads, _executor
    n = max(1, int(n))
    with _executor_lock:
        if n != _num_threads and _executor is not None:
            _executor.shutdown(wait=True)
            _executor = None
        _num_threads = n
    logger.debug(f"worker threads set to {n}")


def get_threads() -> int:
    return _num_threads


def get_executor() -> ThreadPoolExecutor:
    """Get or create the global thread pool executor."""
    global _executor
    with _executor_lock:
        if _executor is None:
            _executor = ThreadPoolExecutor(max_workers=_num_threads)
    return _executor


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
    items = list(items)
    if _num_threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return list(get_executor().map(fn, items))
