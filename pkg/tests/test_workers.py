import threading

import numpy as np
import pytest

from cccharts.workers import WorkerPool, chunk_rng, chunk_sizes


@pytest.mark.parametrize("threads", [1, 2, 8])
def test_map_keeps_input_order(threads):
    assert WorkerPool(threads).map(lambda x: x * x, range(20)) == [x * x for x in range(20)]


def test_map_uses_several_threads():
    seen = set()
    barrier = threading.Barrier(2, timeout=5)

    def work(i):
        seen.add(threading.get_ident())
        if i < 2:
            barrier.wait()
        return i

    WorkerPool(2).map(work, range(4))
    assert len(seen) == 2


def test_first_error_is_raised():
    def work(i):
        if i in (3, 5):
            raise ValueError(f"bad item {i}")
        return i

    with pytest.raises(ValueError, match="bad item 3"):
        WorkerPool(4).map(work, range(8))


def test_threads_must_be_positive():
    with pytest.raises(ValueError):
        WorkerPool(0)


def test_chunk_sizes():
    assert chunk_sizes(10, 4) == [4, 4, 2]
    assert chunk_sizes(8, 4) == [4, 4]
    assert chunk_sizes(0, 4) == []


def test_chunk_rng_depends_only_on_seed_and_index():
    a = chunk_rng(7, 2).uniform(size=5)
    b = chunk_rng(7, 2).uniform(size=5)
    c = chunk_rng(7, 3).uniform(size=5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
