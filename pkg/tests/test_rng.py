import numpy as np
import pytest

from wzlab.rng import stream


def test_stream_reproducible():
    a = stream(1, "y", 0, 2).random(5)
    b = stream(1, "y", 0, 2).random(5)
    np.testing.assert_array_equal(a, b)


def test_streams_distinct_by_purpose_and_key():
    base = stream(1, "y", 0).random(4)
    assert not np.array_equal(base, stream(1, "noise", 0).random(4))
    assert not np.array_equal(base, stream(1, "y", 1).random(4))
    assert not np.array_equal(base, stream(2, "y", 0).random(4))


def test_prefix_property():
    long = stream(9, "phi", 3).standard_normal(100)
    short = stream(9, "phi", 3).standard_normal(10)
    np.testing.assert_array_equal(long[:10], short)


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_seed_range(seed):
    with pytest.raises(ValueError):
        stream(seed, "y")


def test_unknown_purpose():
    with pytest.raises(KeyError):
        stream(0, "nope")
