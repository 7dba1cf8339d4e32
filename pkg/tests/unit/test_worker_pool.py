import threading

import pytest

from utils.worker_pool import chunk_slices, map_chunks

pytestmark = pytest.mark.unit


def test_chunk_slices_partition_range():
    slices = chunk_slices(5, 2)
    assert slices == [slice(0, 2), slice(2, 4), slice(4, 5)]
    assert chunk_slices(0, 4) == []


@pytest.mark.parametrize("workers", [1, 2, 8])
def test_results_come_back_in_slice_order(workers):
    results = map_chunks(lambda s: list(range(s.start, s.stop)), 23, workers=workers, chunk_size=3)
    assert [i for chunk in results for i in chunk] == list(range(23))


def test_pool_uses_worker_threads():
    seen = set()

    def record(s):
        seen.add(threading.get_ident())
        return s.stop - s.start

    assert sum(map_chunks(record, 40, workers=4, chunk_size=1)) == 40
    assert threading.get_ident() not in seen


def test_single_chunk_runs_inline():
    seen = []
    map_chunks(lambda s: seen.append(threading.get_ident()), 3, workers=4, chunk_size=10)
    assert seen == [threading.get_ident()]


def test_errors_propagate():
    def fail(s):
        raise RuntimeError(f"chunk {s.start}")

    with pytest.raises(RuntimeError, match="chunk"):
        map_chunks(fail, 10, workers=2, chunk_size=2)
