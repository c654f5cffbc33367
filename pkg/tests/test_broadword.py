import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from recsplit.broadword import (
    fixed_point_reduce,
    mulhi64,
    next_one,
    read_bits,
    select64,
    select_from,
    words_for,
    write_bits,
)

from reference import naive_select

u64s = st.integers(0, (1 << 64) - 1)


@given(u64s, u64s)
def test_mulhi64(a, b):
    assert int(mulhi64(np.uint64(a), np.uint64(b))) == (a * b) >> 64


@given(u64s, st.integers(1, (1 << 32) - 1))
def test_fixed_point_reduce(h, n):
    assert int(fixed_point_reduce(np.uint64(h), n)) == (h * n) >> 64


@given(u64s.filter(lambda x: x != 0), st.data())
def test_select64_matches_scan(x, data):
    ones = [j for j in range(64) if (x >> j) & 1]
    k = data.draw(st.integers(0, len(ones) - 1))
    assert int(select64(np.uint64(x), k)) == ones[k]


def test_select64_edges():
    assert select64(np.uint64(1), 0) == 0
    assert select64(np.uint64(1 << 63), 0) == 63
    full = np.uint64((1 << 64) - 1)
    assert [select64(full, k) for k in range(64)] == list(range(64))


@settings(max_examples=200)
@given(st.lists(u64s, min_size=1, max_size=6), st.data())
def test_select_from_and_next_one(words, data):
    arr = np.array(words + [(1 << 64) - 1], dtype=np.uint64)
    start = data.draw(st.integers(0, 64 * len(words) - 1))
    k = data.draw(st.integers(0, 10))
    assert select_from(arr, start, k) == naive_select(arr, start, k)
    assert next_one(arr, start) == naive_select(arr, start, 0)


@settings(max_examples=200)
@given(st.lists(st.tuples(u64s, st.integers(0, 64)), max_size=20))
def test_write_then_read_bits(fields):
    total = sum(w for _, w in fields)
    words = np.zeros(words_for(total) + 1, dtype=np.uint64)
    pos = 0
    expected = []
    for value, width in fields:
        value &= (1 << width) - 1
        write_bits(words, pos, np.uint64(value), width)
        expected.append((pos, width, value))
        pos += width
    for p, width, value in expected:
        assert int(read_bits(words, p, width)) == value
