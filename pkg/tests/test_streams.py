import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from scorecomp import streams


@given(seed=st.integers(0, 2**64 - 1), key=st.lists(st.integers(0, 2**32), max_size=5))
def test_same_address_same_draws(seed, key):
    a = streams.normal(seed, tuple(key), 4)
    b = streams.normal(seed, tuple(key), 4)
    assert np.array_equal(a, b)


def test_draw_independent_of_access_order():
    first = [streams.normal(7, (1, k), 3) for k in range(5)]
    second = [streams.normal(7, (1, k), 3) for k in reversed(range(5))][::-1]
    for a, b in zip(first, second):
        assert np.array_equal(a, b)


def test_distinct_addresses_differ():
    draws = {tuple(streams.normal(7, key, 2)) for key in [(0,), (1,), (0, 0), (0, 1), (1, 0)]}
    assert len(draws) == 5
    assert not np.array_equal(streams.normal(1, (0,), 2), streams.normal(2, (0,), 2))


def test_streams_are_uncorrelated():
    a = np.concatenate([streams.normal(3, (streams.INIT, k), 50) for k in range(200)])
    b = np.concatenate([streams.normal(3, (streams.RENOISE, k), 50) for k in range(200)])
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(a.size)


def test_negative_addresses_rejected():
    with pytest.raises(ValueError):
        streams.stream(-1)
    with pytest.raises(ValueError):
        streams.stream(0, 1, -2)
