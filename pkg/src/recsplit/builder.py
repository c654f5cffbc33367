"""RecSplit construction.

Keys are hashed to signatures, distributed into ``ceil(n / b)`` buckets by the
high signature half, and every bucket gets its own splitting tree, built by
brute-force search over the enumerated hash family. Buckets are independent,
so they are processed in chunks by a thread pool; an assembler concatenates
the chunk bit streams in bucket order and builds the Elias-Fano index.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .broadword import U64, words_for
from .eliasfano import BETA_SHIFT, DoubleEliasFano
from .evaluator import RecSplitMphf
from .ricecodec import RiceBitVector, append_bits, code_length, encode_codes
from .signatures import LEVEL_STRIDE, bucket_of, remap, sign_many
from .strategy import MAX_LEAF_SIZE, SplitStrategy

DEFAULT_MAX_SEARCH_INDEX = 1 << 30

_OK = 0
_DUPLICATE = 1
_OVERFLOW = 2


class BuildError(Exception):
    pass


class DuplicateKeyError(BuildError):
    pass


class SearchOverflowError(BuildError):
    pass


def default_threads() -> int:
    env = os.environ.get("RECSPLIT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class BuildConfig:
    leaf_size: int = 8
    bucket_size: int = 100
    seed: int = 0
    max_search_index: int = DEFAULT_MAX_SEARCH_INDEX
    threads: int = field(default_factory=default_threads)
    check: bool = False

    def __post_init__(self):
        if not 1 <= self.leaf_size <= MAX_LEAF_SIZE:
            raise ValueError(f"leaf_size must be in [1, {MAX_LEAF_SIZE}]")
        if self.bucket_size < 1:
            raise ValueError("bucket_size must be positive")
        if not 1 <= self.max_search_index <= LEVEL_STRIDE:
            raise ValueError("max_search_index must be in [1, 2**32]")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@numba.njit(cache=True, nogil=True)
def find_bijection(lo, start, m, func_base, max_index):
    """First index whose function maps ``lo[start:start + m]`` onto [0, m), or -1.

    Four consecutive indices are tried per pass over the keys; the loop body
    is branch-free, which pays off because most trials fail late.
    """
    full = (U64(1) << U64(m)) - U64(1)
    one = U64(1)
    for i in range(0, max_index, 4):
        f = func_base + i
        m0 = U64(0)
        m1 = U64(0)
        m2 = U64(0)
        m3 = U64(0)
        for j in range(m):
            x = lo[start + j]
            m0 |= one << U64(remap(x, f, m))
            m1 |= one << U64(remap(x, f + 1, m))
            m2 |= one << U64(remap(x, f + 2, m))
            m3 |= one << U64(remap(x, f + 3, m))
        found = -1
        if m0 == full:
            found = i
        elif m1 == full:
            found = i + 1
        elif m2 == full:
            found = i + 2
        elif m3 == full:
            found = i + 3
        if found >= 0:
            return found if found < max_index else -1
    return -1


@numba.njit(cache=True, nogil=True)
def _split_scalar(lo, start, m, fanout, unit, func_base, max_index, counts):
    last = m - (fanout - 1) * unit
    for i in range(max_index):
        for p in range(fanout):
            counts[p] = 0
        ok = True
        for j in range(m):
            p = remap(lo[start + j], func_base + i, m) // unit
            counts[p] += 1
            if counts[p] > (unit if p < fanout - 1 else last):
                ok = False
                break
        if ok:
            return i
    return -1


@numba.njit(cache=True, nogil=True)
def _part_increment(h, fanout, unit, recip, width):
    # one count field per part except the last, which is implied
    if fanout == 2:
        return U64(h < unit)
    p = (U64(h) * recip) >> U64(32)
    flag = U64(p < U64(fanout - 1))
    return flag << (U64(width) * p * flag)


@numba.njit(cache=True, nogil=True)
def find_split(lo, start, m, fanout, unit, func_base, max_index, counts):
    """First index splitting ``lo[start:start + m]`` into parts of ``unit`` keys.

    The last part takes the remaining ``m - (fanout - 1) * unit`` keys.
    Returns -1 if no index below ``max_index`` works.

    The sizes of all parts but the last are accumulated as fields of one
    64-bit word. A field is ``bit_length(m)`` bits wide, so it cannot carry
    into its neighbour, and a trial succeeds iff the word equals the target.
    """
    width = 1
    while (1 << width) <= m:
        width += 1
    if (fanout - 1) * width > 64 or (fanout > 2 and m >= 1 << 16):
        return _split_scalar(lo, start, m, fanout, unit, func_base, max_index, counts)
    target = U64(0)
    for p in range(fanout - 1):
        target |= U64(unit) << U64(width * p)
    # exact floor division by unit for arguments below 2**16
    recip = U64((1 << 32) // unit + 1)
    for i in range(0, max_index, 4):
        f = func_base + i
        c0 = U64(0)
        c1 = U64(0)
        c2 = U64(0)
        c3 = U64(0)
        for j in range(m):
            x = lo[start + j]
            c0 += _part_increment(remap(x, f, m), fanout, unit, recip, width)
            c1 += _part_increment(remap(x, f + 1, m), fanout, unit, recip, width)
            c2 += _part_increment(remap(x, f + 2, m), fanout, unit, recip, width)
            c3 += _part_increment(remap(x, f + 3, m), fanout, unit, recip, width)
        found = -1
        if c0 == target:
            found = i
        elif c1 == target:
            found = i + 1
        elif c2 == target:
            found = i + 2
        elif c3 == target:
            found = i + 3
        if found >= 0:
            return found if found < max_index else -1
    return -1


@numba.njit(cache=True, nogil=True)
def _partition(lo, idx, tmp_lo, tmp_idx, start, m, fanout, unit, func, counts):
    for p in range(fanout):
        counts[p] = start + p * unit
    track = len(idx) > 0
    for j in range(m):
        x = lo[start + j]
        p = remap(x, func, m) // unit
        tmp_lo[counts[p]] = x
        if track:
            tmp_idx[counts[p]] = idx[start + j]
        counts[p] += 1
    for j in range(start, start + m):
        lo[j] = tmp_lo[j]
        if track:
            idx[j] = tmp_idx[j]


@numba.njit(cache=True, nogil=True)
def _build_tree(lo, idx, tmp_lo, tmp_idx, truth, m, leaf_size, fanout_t, unit_t, rice_t,
                values, params, max_index, counts, stack):
    """Search the splitting tree over ``lo[:m]``, recording codes in preorder.

    Returns the number of codes, or -1 on search overflow.
    """
    track = len(truth) > 0
    ncodes = 0
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = m
    stack[0, 2] = 0
    top = 1
    while top > 0:
        top -= 1
        start = stack[top, 0]
        size = stack[top, 1]
        depth = stack[top, 2]
        if size <= 1:
            if size == 1 and track:
                truth[idx[start]] = start
            continue
        func_base = depth * LEVEL_STRIDE
        if size <= leaf_size:
            i = find_bijection(lo, start, size, func_base, max_index)
            if i < 0:
                return -1
            values[ncodes] = i
            params[ncodes] = rice_t[size]
            ncodes += 1
            if track:
                for j in range(size):
                    truth[idx[start + j]] = start + remap(lo[start + j], func_base + i, size)
            continue
        fanout = fanout_t[size]
        unit = unit_t[size]
        i = find_split(lo, start, size, fanout, unit, func_base, max_index, counts)
        if i < 0:
            return -1
        values[ncodes] = i
        params[ncodes] = rice_t[size]
        ncodes += 1
        _partition(lo, idx, tmp_lo, tmp_idx, start, size, fanout, unit, func_base + i, counts)
        # children pushed last-first so that they pop in preorder
        for p in range(fanout - 1, -1, -1):
            stack[top, 0] = start + p * unit
            stack[top, 1] = unit if p < fanout - 1 else size - (fanout - 1) * unit
            stack[top, 2] = depth + 1
            top += 1
    return ncodes


@numba.njit(cache=True, nogil=True)
def bucket_sort(hi, lo, nbuckets):
    """Group ``lo`` by bucket; returns ``(grouped lo, original indices, starts)``."""
    n = len(hi)
    starts = np.zeros(nbuckets + 1, dtype=np.int64)
    for i in range(n):
        starts[bucket_of(hi[i], nbuckets) + 1] += 1
    for b in range(nbuckets):
        starts[b + 1] += starts[b]
    fill = starts[:-1].copy()
    out = np.empty(n, dtype=np.uint64)
    order = np.empty(n, dtype=np.int64)
    for i in range(n):
        b = bucket_of(hi[i], nbuckets)
        out[fill[b]] = lo[i]
        order[fill[b]] = i
        fill[b] += 1
    return out, order, starts


@numba.njit(cache=True, nogil=True)
def build_chunk(lo, idx, truth, starts, first, last, leaf_size, fanout_t, unit_t,
                rice_t, nodes_t, max_index):
    """Build and encode buckets ``first .. last - 1``.

    Returns ``(status, failing bucket, words, bit length, per-bucket bits)``.
    Within each bucket ``lo`` is sorted and then partitioned in place.
    """
    n_here = starts[last] - starts[first]
    words = np.zeros(words_for_estimate(n_here), dtype=np.uint64)
    pos = 0
    bucket_bits = np.zeros(last - first, dtype=np.int64)
    max_m = 0
    for b in range(first, last):
        max_m = max(max_m, starts[b + 1] - starts[b])
    max_codes = nodes_t[max_m] + 1
    values = np.zeros(max_codes, dtype=np.int64)
    params = np.zeros(max_codes, dtype=np.int64)
    tmp_lo = np.empty(max_m, dtype=np.uint64)
    tmp_idx = np.empty(max_m if len(idx) > 0 else 0, dtype=np.int64)
    counts = np.zeros(64, dtype=np.int64)
    stack = np.empty((max_codes + 64, 3), dtype=np.int64)
    for b in range(first, last):
        s = starts[b]
        m = starts[b + 1] - s
        # local views so that tree positions start at the bucket
        blo = lo[s:s + m]
        bidx = idx[s:s + m] if len(idx) > 0 else idx
        if len(bidx) > 0:
            order = np.argsort(blo)
            blo[:] = blo[order]
            bidx[:] = bidx[order]
        else:
            blo.sort()
        for j in range(1, m):
            if blo[j] == blo[j - 1]:
                return _DUPLICATE, b, words, pos, bucket_bits
        ncodes = _build_tree(blo, bidx, tmp_lo, tmp_idx, truth, m, leaf_size, fanout_t, unit_t,
                             rice_t, values, params, max_index, counts, stack)
        if ncodes < 0:
            return _OVERFLOW, b, words, pos, bucket_bits
        if len(truth) > 0:
            for j in range(m):
                truth[bidx[j]] += s
        nbits = code_length(values, params, ncodes)
        need = ((pos + nbits) >> 6) + 2
        if need > len(words):
            grown = np.zeros(max(need, 2 * len(words)), dtype=np.uint64)
            grown[:len(words)] = words
            words = grown
        pos = encode_codes(words, pos, values, params, ncodes)
        bucket_bits[b - first] = nbits
    return _OK, -1, words, pos, bucket_bits


@numba.njit(cache=True)
def words_for_estimate(nkeys):
    return (2 * nkeys + 63) // 64 + 2


def build(keys, config: BuildConfig | None = None, **kwargs) -> RecSplitMphf:
    """Build an MPHF over distinct byte-string keys (or fixed-width uint8 records)."""
    if config is None:
        config = BuildConfig(**kwargs)
    elif kwargs:
        raise TypeError("pass either a BuildConfig or keyword options")
    hi, lo = sign_many(keys, config.seed)
    return build_from_signatures(hi, lo, config)


def build_from_signatures(hi: np.ndarray, lo: np.ndarray, config: BuildConfig,
                          ground_truth: bool = False):
    """Build from precomputed signatures.

    With ``ground_truth`` the result is ``(mphf, ranks)`` where ``ranks[i]``
    is the value the builder assigned to signature ``i``.
    """
    n = len(hi)
    leaf_size = config.leaf_size
    nbuckets = -(-n // config.bucket_size)
    hi = np.ascontiguousarray(hi, dtype=np.uint64)
    lo = np.ascontiguousarray(lo, dtype=np.uint64)
    grouped, order, starts = bucket_sort(hi, lo, nbuckets)
    max_bucket = int(np.diff(starts).max()) if nbuckets else 0
    strategy = SplitStrategy.for_bucket_size(leaf_size, config.bucket_size)
    tables = strategy.tables(max(max_bucket, 1))

    track = ground_truth or config.check
    idx = order if track else np.zeros(0, dtype=np.int64)
    del order
    truth = np.zeros(n if track else 0, dtype=np.int64)

    chunks = _chunk_bounds(starts, config.threads)

    def run(bounds):
        first, last = bounds
        return build_chunk(grouped, idx, truth, starts, first, last, leaf_size,
                           tables.fanout, tables.unit, tables.rice, tables.nodes,
                           config.max_search_index)

    if config.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]

    total_bits = 0
    bucket_bits = []
    for status, bad, _, nbits, per_bucket in results:
        if status == _DUPLICATE:
            raise DuplicateKeyError(f"duplicate key (or 128-bit signature collision) in bucket {bad}")
        if status == _OVERFLOW:
            raise SearchOverflowError(
                f"search in bucket {bad} exceeded {config.max_search_index} trials")
        total_bits += nbits
        bucket_bits.append(per_bucket)
    words = np.zeros(words_for(total_bits) + 1, dtype=np.uint64)
    pos = 0
    for _, _, chunk_words, nbits, _ in results:
        pos = append_bits(words, pos, chunk_words, nbits)
    bits = RiceBitVector(words, total_bits)

    offsets = np.zeros(nbuckets + 1, dtype=np.int64)
    if nbuckets:
        np.cumsum(np.concatenate(bucket_bits), out=offsets[1:])
    beta = min((total_bits << BETA_SHIFT) // n, (1 << 32) - 1) if n else 0
    ef = DoubleEliasFano.build(starts, offsets, beta)
    mphf = RecSplitMphf(leaf_size, config.bucket_size, config.seed, n, nbuckets, ef, bits,
                        strategy=strategy, max_bucket=max_bucket)
    if config.check:
        _check(mphf, hi, lo, truth)
    if ground_truth:
        return mphf, truth
    return mphf


def _chunk_bounds(starts: np.ndarray, threads: int) -> list[tuple[int, int]]:
    nbuckets = len(starts) - 1
    if nbuckets == 0:
        return []
    nchunks = 1 if threads <= 1 else min(nbuckets, 8 * threads)
    bounds = np.linspace(0, nbuckets, nchunks + 1).astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _check(mphf: RecSplitMphf, hi, lo, truth) -> None:
    from .evaluator import naive_lookup

    got = mphf.evaluate_signatures(hi, lo)
    if not np.array_equal(got, truth):
        raise AssertionError("evaluator disagrees with builder assignment")
    if mphf.n:
        sample = np.random.default_rng(0).integers(0, mphf.n, min(mphf.n, 200))
        for i in sample:
            if naive_lookup(mphf, int(hi[i]), int(lo[i])) != truth[i]:
                raise AssertionError("naive evaluator disagrees with builder assignment")


def _as_lo(sigs) -> np.ndarray:
    return np.ascontiguousarray(sigs, dtype=np.uint64)


def search_split(sigs, part_sizes, start_index: int = 0,
                 max_index: int = DEFAULT_MAX_SEARCH_INDEX) -> int:
    """Smallest index >= ``start_index`` splitting ``sigs`` into ``part_sizes``.

    ``sigs`` are low signature halves; ``part_sizes`` must have the strategy
    shape ``(u, ..., u, last)`` with ``1 <= last <= u``.
    """
    lo = _as_lo(sigs)
    parts = [int(k) for k in part_sizes]
    if not parts or any(k < 1 for k in parts) or sum(parts) != len(lo):
        raise ValueError("part sizes must be positive and sum to the number of signatures")
    unit = parts[0]
    if any(k != unit for k in parts[:-1]) or parts[-1] > unit:
        raise ValueError("parts must be (u, ..., u, last) with last <= u")
    if len(parts) == 1:
        return start_index
    i = find_split(lo, 0, len(lo), len(parts), unit, start_index, max_index,
                   np.zeros(len(parts), dtype=np.int64))
    if i < 0:
        raise SearchOverflowError(f"no split found within {max_index} trials")
    return start_index + int(i)


def search_bijection(sigs, start_index: int = 0,
                     max_index: int = DEFAULT_MAX_SEARCH_INDEX) -> int:
    """Smallest index >= ``start_index`` whose function is a bijection on ``sigs``."""
    lo = _as_lo(sigs)
    if len(lo) > MAX_LEAF_SIZE:
        raise ValueError(f"leaves hold at most {MAX_LEAF_SIZE} keys")
    i = find_bijection(lo, 0, len(lo), start_index, max_index)
    if i < 0:
        raise SearchOverflowError(f"no bijection found within {max_index} trials")
    return start_index + int(i)


def build_bucket(sigs, strategy: SplitStrategy,
                 max_index: int = DEFAULT_MAX_SEARCH_INDEX) -> list[tuple[int, int]]:
    """Preorder ``(index, rice parameter)`` codes of the tree over one bucket."""
    lo = np.sort(_as_lo(sigs))
    m = len(lo)
    if m > 1 and np.any(lo[1:] == lo[:-1]):
        raise DuplicateKeyError("duplicate signature in bucket")
    tables = strategy.tables(max(m, 1))
    max_codes = int(tables.nodes[m]) + 1
    values = np.zeros(max_codes, dtype=np.int64)
    params = np.zeros(max_codes, dtype=np.int64)
    empty = np.zeros(0, dtype=np.int64)
    ncodes = _build_tree(lo, empty, np.empty(m, dtype=np.uint64), empty, empty, m,
                         strategy.leaf_size, tables.fanout, tables.unit, tables.rice,
                         values, params, max_index, np.zeros(64, dtype=np.int64),
                         np.empty((max_codes + 64, 3), dtype=np.int64))
    if ncodes < 0:
        raise SearchOverflowError(f"search exceeded {max_index} trials")
    return [(int(values[k]), int(params[k])) for k in range(ncodes)]
