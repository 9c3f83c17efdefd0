import contextvars
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from src.config.settings import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """Order-preserving map over a thread pool.

    Each task runs in a copy of the caller's context, so an open Tape stays
    active inside worker threads. Results come back in input order, which
    keeps any downstream reduction deterministic.
    """
    items = list(items)
    workers = settings.workers if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    def submit(executor, item):
        ctx = contextvars.copy_context()
        return executor.submit(ctx.run, fn, item)

    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [submit(executor, item) for item in items]
        return [f.result() for f in futures]
