import logging
import queue
import threading
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


class WorkerPool:
    """Indexed worker pool over daemon threads fed from a queue.

    Results come back in input order, so the outcome of map() never depends
    on the number of threads.
    """

    def __init__(self, threads: int = 1, poll_timeout: float = 0.5):
        if threads < 1:
            raise ValueError(f"threads must be >= 1, got {threads}")
        self.threads = int(threads)
        self.poll_timeout = poll_timeout

    def map(self, func: Callable[[T], R], items: Sequence[T]) -> List[R]:
        items = list(items)
        if self.threads == 1 or len(items) <= 1:
            return [func(item) for item in items]

        tasks: queue.Queue = queue.Queue()
        for index, item in enumerate(items):
            tasks.put((index, item))
        results: List[Optional[R]] = [None] * len(items)
        errors: List[tuple] = []
        lock = threading.Lock()

        def worker():
            while True:
                try:
                    index, item = tasks.get(timeout=self.poll_timeout)
                except queue.Empty:
                    return
                try:
                    results[index] = func(item)
                except Exception as e:
                    logger.error(f"Error in worker on item {index}: {e}")
                    with lock:
                        errors.append((index, e))
                finally:
                    tasks.task_done()

        workers = [threading.Thread(target=worker, daemon=True) for _ in range(min(self.threads, len(items)))]
        for t in workers:
            t.start()
        for t in workers:
            t.join()
        if errors:
            raise min(errors, key=lambda pair: pair[0])[1]
        return results


def chunk_sizes(total: int, chunk: int) -> List[int]:
    """Split total samples into fixed-size chunks (the last one possibly shorter)."""
    if total < 0 or chunk < 1:
        raise ValueError("total must be >= 0 and chunk >= 1")
    full, rest = divmod(int(total), int(chunk))
    return [chunk] * full + ([rest] if rest else [])


def chunk_rng(seed: int, index: int) -> np.random.Generator:
    """Random stream of one chunk, derived from (seed, chunk index) only."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
