import numpy as np

from condwalk.rng import CHUNK, Stream, as_stream, chunk_sizes, map_chunks, thread_count


def test_streams_are_addressable():
    a = Stream(5, 3).gen.random(4)
    b = Stream(5, 3).gen.random(4)
    c = Stream(5, 4).gen.random(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_as_stream():
    assert as_stream(3).seed == 3
    g = np.random.default_rng(0)
    assert as_stream(g).gen is g


def test_chunk_sizes():
    assert chunk_sizes(2 * CHUNK + 5) == [CHUNK, CHUNK, 5]
    assert chunk_sizes(0) == []


def test_results_do_not_depend_on_thread_count(monkeypatch):
    fn = lambda k, s: s.gen.random(k)
    one = np.concatenate(map_chunks(fn, 5 * CHUNK + 17, 11, threads=1))
    four = np.concatenate(map_chunks(fn, 5 * CHUNK + 17, 11, threads=4))
    assert np.array_equal(one, four)
    monkeypatch.setenv("CONDWALK_THREADS", "3")
    assert thread_count() == 3
    env = np.concatenate(map_chunks(fn, 5 * CHUNK + 17, 11))
    assert np.array_equal(one, env)
    monkeypatch.setenv("CONDWALK_THREADS", "junk")
    assert thread_count() == 1
