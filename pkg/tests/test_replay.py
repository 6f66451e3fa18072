import threading

import numpy as np
import pytest

from lnss.core import TransformedTransition
from lnss.replay import ReplayBuffer, buffer_append, buffer_sample


def row(i, producer=0):
    # every field encodes the same id so torn rows are detectable
    v = float(producer * 1_000_000 + i)
    return TransformedTransition(np.array([v, v]), np.array([v]), v, np.array([v, v]), i % 2 == 0, 1 + i % 3)


def test_append_to_empty():
    buf = ReplayBuffer(5)
    buffer_append(buf, row(0))
    assert len(buf) == 1


def test_ring_overwrites_oldest():
    buf = ReplayBuffer(3)
    for i in range(4):
        buf.append(row(i))
    assert len(buf) == 3
    np.testing.assert_array_equal(buf.snapshot().reward, [1.0, 2.0, 3.0])


def test_single_row_sample():
    buf = ReplayBuffer(10)
    buf.append(row(7))
    b = buffer_sample(buf, 1, np.random.default_rng(0))
    assert b.reward[0] == 7.0 and b.bootstrap_gap[0] == 2 and not b.bootstrap_terminal[0]


def test_sample_reproducible():
    buf = ReplayBuffer(100)
    buf.extend(row(i) for i in range(50))
    a = buf.sample(16, np.random.default_rng(3))
    b = buf.sample(16, np.random.default_rng(3))
    np.testing.assert_array_equal(a.state, b.state)
    np.testing.assert_array_equal(a.reward, b.reward)


def test_underfilled():
    buf = ReplayBuffer(10)
    buf.append(row(0))
    with pytest.raises(ValueError, match="buffer underfilled"):
        buf.sample(2, np.random.default_rng(0))


def test_uniform_frequencies():
    buf = ReplayBuffer(10)
    buf.extend(row(i) for i in range(10))
    rng = np.random.default_rng(11)
    draws = np.concatenate([buf.sample(10, rng).reward for _ in range(10_000)])
    counts = np.bincount(draws.astype(int), minlength=10)
    expected, sigma = 1e4, np.sqrt(1e5 * 0.1 * 0.9)
    assert np.all(np.abs(counts - expected) <= 3 * sigma)


def run_producers(buf, producers, per_producer):
    start = threading.Barrier(producers)

    def produce(p):
        start.wait()
        for i in range(per_producer):
            buf.append(row(i, p))

    threads = [threading.Thread(target=produce, args=(p,)) for p in range(producers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


def test_concurrent_producers_lose_nothing():
    buf = ReplayBuffer(20_000)
    run_producers(buf, 8, 1000)
    snap = buf.snapshot()
    assert len(buf) == 8000
    ids = snap.reward.astype(np.int64)
    assert len(set(ids.tolist())) == 8000
    for p in range(8):
        mine = ids[ids // 1_000_000 == p] % 1_000_000
        np.testing.assert_array_equal(mine, np.arange(1000))


def test_concurrent_capacity_bound():
    buf = ReplayBuffer(500)
    run_producers(buf, 8, 1000)
    assert len(buf) == 500


def test_no_torn_reads_while_appending():
    buf = ReplayBuffer(1000)
    buf.extend(row(i) for i in range(100))
    stop = threading.Event()

    def produce():
        i = 0
        while not stop.is_set():
            buf.append(row(i, 1))
            i += 1

    th = threading.Thread(target=produce)
    th.start()
    rng = np.random.default_rng(0)
    try:
        for _ in range(300):
            b = buf.sample(32, rng)
            np.testing.assert_array_equal(b.state[:, 0], b.reward)
            np.testing.assert_array_equal(b.bootstrap_state[:, 1], b.reward)
            np.testing.assert_array_equal(b.action[:, 0], b.reward)
    finally:
        stop.set()
        th.join()


def test_dump(tmp_path):
    buf = ReplayBuffer(4)
    buf.extend(row(i) for i in range(3))
    buf.dump(tmp_path / "buf.npz")
    with np.load(tmp_path / "buf.npz") as d:
        np.testing.assert_array_equal(d["reward"], [0.0, 1.0, 2.0])
