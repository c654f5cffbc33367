import math

import numba
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from recsplit.signatures import (
    LEVEL_STRIDE,
    bucket_of,
    remap,
    sign,
    sign_many,
)

import reference

# SMHasher's published verification value for MurmurHash3_x64_128
MURMUR3_X64_128_VERIFICATION = 0x6384BA69


def _sign_pair(data, seed):
    s = sign(data, seed)
    return s.hi, s.lo


def test_reference_murmur_matches_published_verification_value():
    assert reference.smhasher_verification(reference.murmur3_x64_128) == MURMUR3_X64_128_VERIFICATION


def test_sign_matches_published_verification_value():
    assert reference.smhasher_verification(_sign_pair) == MURMUR3_X64_128_VERIFICATION


@given(st.binary(max_size=80), st.integers(0, (1 << 64) - 1))
def test_sign_matches_reference(data, seed):
    assert tuple(sign(data, seed)) == reference.murmur3_x64_128(data, seed)


@given(st.binary(max_size=40), st.integers(0, (1 << 64) - 1))
def test_sign_is_deterministic(data, seed):
    assert sign(data, seed) == sign(data, seed)


def test_seeds_give_different_signatures():
    keys = [f"key{i}".encode() for i in range(1000)]
    for k in keys:
        assert sign(k, 1) != sign(k, 2)


def test_sign_many_matches_sign_for_lists_and_records():
    keys = [bytes(range(i % 37)) + i.to_bytes(4, "little") for i in range(500)]
    hi, lo = sign_many(keys, 99)
    assert [(int(a), int(b)) for a, b in zip(hi, lo)] == [tuple(sign(k, 99)) for k in keys]
    records = np.random.default_rng(1).integers(0, 256, (300, 16), dtype=np.uint8)
    hi, lo = sign_many(records, 5)
    for i in (0, 17, 299):
        assert (int(hi[i]), int(lo[i])) == tuple(sign(records[i].tobytes(), 5))


def test_output_bit_frequencies():
    keys = np.random.default_rng(2024).integers(0, 256, (10**6, 16), dtype=np.uint8)
    hi, lo = sign_many(keys, 0)
    for half in (hi, lo):
        bits = np.unpackbits(half.view(np.uint8).reshape(-1, 8), axis=1)
        freq = bits.mean(axis=0)
        assert np.all(np.abs(freq - 0.5) <= 0.01)


def test_bucket_of_examples():
    assert bucket_of(np.uint64(0), 100) == 0
    assert bucket_of(np.uint64((1 << 64) - 1), 100) == 99
    assert bucket_of(np.uint64(1 << 63), 100) == 50


@given(st.integers(0, (1 << 64) - 1), st.integers(0, (1 << 64) - 1), st.integers(1, 1 << 40))
def test_bucket_of_is_monotone_and_in_range(u1, u2, n):
    a, b = sorted((u1, u2))
    ba, bb = bucket_of(np.uint64(a), n), bucket_of(np.uint64(b), n)
    assert 0 <= ba <= bb < n
    assert ba == (a * n) >> 64


@given(st.integers(0, (1 << 64) - 1), st.integers(0, 4 * LEVEL_STRIDE), st.integers(1, (1 << 32) - 1))
def test_remap_matches_reference(lo, index, n):
    got = remap(np.uint64(lo), np.uint64(index), n)
    assert got == reference.remap(lo, index, n)
    assert 0 <= got < n


@given(st.integers(0, (1 << 64) - 1), st.integers(0, 1 << 40))
def test_remap_range_one(lo, index):
    assert remap(np.uint64(lo), np.uint64(index), 1) == 0


def _chi_square_16(values):
    counts = np.bincount(values, minlength=16)
    expected = len(values) / 16
    return float(((counts - expected) ** 2 / expected).sum())


# upper 0.001 quantile of chi-square with 15 degrees of freedom
CHI2_15_999 = 37.697


@pytest.mark.parametrize("index", [0, 1, 7, LEVEL_STRIDE + 3])
def test_remap_uniform_chi_square(index):
    _, lo = sign_many(np.random.default_rng(index).integers(0, 256, (10**6, 16), dtype=np.uint8), 0)
    assert _chi_square_16(_remap_all(lo, index, 16)) < CHI2_15_999


def test_remap_uniform_on_consecutive_signatures():
    # structured inputs must still spread evenly
    lo = np.arange(10**6, dtype=np.uint64)
    assert _chi_square_16(_remap_all(lo, 0, 16)) < CHI2_15_999


def test_remap_indices_look_independent():
    _, lo = sign_many(np.random.default_rng(3).integers(0, 256, (10**5, 16), dtype=np.uint8), 0)
    a = _remap_all(lo, 0, 16)
    b = _remap_all(lo, 1, 16)
    joint = np.bincount(a * 16 + b, minlength=256)
    expected = len(a) / 256
    chi2 = float(((joint - expected) ** 2 / expected).sum())
    # 225 degrees of freedom; mean 225, sd ~21
    assert chi2 < 225 + 6 * math.sqrt(2 * 225)


@numba.njit
def _remap_kernel(lo, index, n):
    out = np.empty(len(lo), dtype=np.int64)
    for i in range(len(lo)):
        out[i] = remap(lo[i], index, n)
    return out


def _remap_all(lo, index, n):
    return _remap_kernel(lo, np.uint64(index), n)
