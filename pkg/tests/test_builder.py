import numpy as np
import pytest

from recsplit import BuildConfig, DuplicateKeyError, SearchOverflowError, build, serialize
from recsplit.builder import build_bucket, build_from_signatures, search_bijection, search_split
from recsplit.ricecodec import decode_bucket, encode_bucket
from recsplit.strategy import SplitStrategy

import reference
from conftest import random_keys

CONFIGS = [(2, 5), (5, 5), (8, 100), (12, 9)]


def sigs(rng, m):
    return rng.integers(0, 1 << 63, m, dtype=np.int64).astype(np.uint64) * np.uint64(2) + np.uint64(
        rng.integers(0, 2))


def is_split(lo, parts, index):
    m = sum(parts)
    counts = [0] * len(parts)
    bounds = np.cumsum(parts)
    for x in lo:
        v = reference.remap(int(x), index, m)
        counts[int(np.searchsorted(bounds, v, side="right"))] += 1
    return counts == list(parts)


def is_bijection(lo, index):
    m = len(lo)
    return sorted(reference.remap(int(x), index, m) for x in lo) == list(range(m))


@pytest.mark.parametrize("field,value", [
    ("leaf_size", 0), ("leaf_size", 25), ("bucket_size", 0),
    ("max_search_index", 0), ("max_search_index", (1 << 32) + 1), ("seed", -1), ("seed", 1 << 64),
])
def test_config_validation(field, value):
    with pytest.raises(ValueError):
        BuildConfig(**{field: value})


def test_threads_env(monkeypatch):
    monkeypatch.setenv("RECSPLIT_THREADS", "3")
    assert BuildConfig().threads == 3


def test_search_split_single_part():
    assert search_split(np.arange(5, dtype=np.uint64), (5,)) == 0


@pytest.mark.parametrize("parts", [(1, 1), (2, 2), (3, 3, 2), (8, 8, 8, 1), (32, 18)])
def test_search_split_is_minimal(rng, parts):
    for _ in range(20):
        lo = sigs(rng, sum(parts))
        start = int(rng.integers(0, 1000))
        i = search_split(lo, parts, start_index=start)
        assert i >= start
        assert is_split(lo, parts, i)
        assert not any(is_split(lo, parts, j) for j in range(start, i))


def test_search_split_rejects_bad_shapes():
    lo = np.arange(6, dtype=np.uint64)
    with pytest.raises(ValueError):
        search_split(lo, (2, 4))
    with pytest.raises(ValueError):
        search_split(lo, (3, 2))


@pytest.mark.parametrize("m", [1, 2, 5, 8])
def test_search_bijection_is_minimal(rng, m):
    for _ in range(10):
        lo = sigs(rng, m)
        i = search_bijection(lo)
        assert is_bijection(lo, i)
        assert not any(is_bijection(lo, j) for j in range(i))


def test_single_key_leaf_uses_index_zero():
    assert search_bijection(np.array([123], dtype=np.uint64)) == 0


def test_search_overflow():
    lo = sigs(np.random.default_rng(0), 12)
    with pytest.raises(SearchOverflowError):
        search_bijection(lo, max_index=1)
    keys = random_keys(2000)
    with pytest.raises(SearchOverflowError):
        build(keys, leaf_size=12, bucket_size=100, max_search_index=3)


def test_build_bucket_small():
    st = SplitStrategy(8)
    lo = sigs(np.random.default_rng(1), 7)
    codes = build_bucket(lo, st)
    assert codes == [(search_bijection(np.sort(lo)), st.rice(7))]
    assert build_bucket(lo[:1], st) == []


def test_build_bucket_two_leaves():
    st = SplitStrategy(8)
    codes = build_bucket(sigs(np.random.default_rng(2), 16), st)
    assert len(codes) == 3
    assert sum(r for _, r in codes) == st.skip_info(16)[0]


@pytest.mark.parametrize("leaf", [2, 5, 8])
def test_bucket_codes_follow_strategy_sizes(leaf):
    st = SplitStrategy(leaf)
    rng = np.random.default_rng(leaf)
    for m in rng.integers(1, 300, 30):
        codes = build_bucket(sigs(rng, int(m)), st)
        fixed, nodes = st.skip_info(int(m))
        assert len(codes) == nodes
        assert sum(r for _, r in codes) == fixed
        bits = encode_bucket(codes)
        assert decode_bucket(bits, 0, [r for _, r in codes]) == [v for v, _ in codes]


def test_empty_build():
    mphf = build([], leaf_size=8, bucket_size=100)
    assert len(mphf) == 0 and mphf.nbuckets == 0
    with pytest.raises(ValueError):
        mphf.lookup(b"x")


def test_single_key():
    mphf = build([b"only"])
    assert mphf.lookup(b"only") == 0
    assert mphf.lookup(b"other") == 0


@pytest.mark.parametrize("leaf,bucket", CONFIGS + [(1, 1), (10, 50)])
@pytest.mark.parametrize("n", [2, 3, 100, 5000])
def test_permutation(leaf, bucket, n):
    keys = random_keys(n, seed=n + leaf)
    mphf = build(keys, BuildConfig(leaf_size=leaf, bucket_size=bucket, check=True, threads=2))
    ranks = mphf.lookup_many(keys)
    assert np.array_equal(np.sort(ranks), np.arange(n))


def test_variable_length_keys():
    keys = [f"key-{i}".encode() * (1 + i % 5) for i in range(3000)]
    mphf = build(keys)
    assert sorted(mphf.lookup(k) for k in keys) == list(range(3000))


def test_duplicate_keys_rejected():
    with pytest.raises(DuplicateKeyError):
        build([b"a", b"b", b"a"])


def test_equal_low_signature_halves_rejected():
    hi = np.array([1, 2, 3], dtype=np.uint64)
    lo = np.array([7, 7, 9], dtype=np.uint64)
    with pytest.raises(DuplicateKeyError):
        build_from_signatures(hi, lo, BuildConfig())


def test_deterministic_and_thread_independent():
    keys = random_keys(20_000, seed=5)
    blobs = {serialize(build(keys, BuildConfig(threads=t, seed=9))) for t in (1, 1, 3, 8)}
    assert len(blobs) == 1


def test_seed_changes_structure():
    keys = random_keys(1000)
    assert serialize(build(keys, seed=1)) != serialize(build(keys, seed=2))


def test_ground_truth_matches_evaluation():
    keys = random_keys(10_000, seed=3)
    from recsplit.signatures import sign_many

    hi, lo = sign_many(keys, 0)
    mphf, truth = build_from_signatures(hi, lo, BuildConfig(leaf_size=5, bucket_size=50),
                                        ground_truth=True)
    assert np.array_equal(mphf.evaluate_signatures(hi, lo), truth)
