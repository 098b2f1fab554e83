import numpy as np
import pytest

from stickyquake.rng import (BLOCK_SIZE, block_bounds, map_blocks, parallel_samples,
                             set_default_threads, stream)


def test_stream_is_keyed_by_ids():
    a = stream(1, "x", 0).random(5)
    assert np.array_equal(a, stream(1, "x", 0).random(5))
    assert not np.array_equal(a, stream(1, "x", 1).random(5))
    assert not np.array_equal(a, stream(2, "x", 0).random(5))
    assert not np.array_equal(a, stream(1, ("x", 1e-3), 0).random(5))
    with pytest.raises(ValueError):
        stream(1, -1)


def test_block_bounds():
    assert block_bounds(0) == []
    assert block_bounds(10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert block_bounds(BLOCK_SIZE)[-1] == (0, BLOCK_SIZE)


def test_parallel_samples_independent_of_threads():
    draw = lambda r, s: r.standard_normal(s)  # noqa: E731
    one = parallel_samples(draw, 10_000, 3, "t", threads=1, block=512)
    many = parallel_samples(draw, 10_000, 3, "t", threads=8, block=512)
    assert one.shape == (10_000,)
    assert np.array_equal(one, many)


def test_map_blocks_order_and_default_threads():
    set_default_threads(4)
    try:
        out = map_blocks(lambda r, s: s, 1000, 0, "b", block=300)
    finally:
        set_default_threads(1)
    assert out == [300, 300, 300, 100]
    with pytest.raises(ValueError):
        set_default_threads(0)
