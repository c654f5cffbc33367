"""Lookup: signature -> bucket -> splitting tree descent -> leaf bijection.

Keys outside the construction set are not detected; they map to some value
in [0, n) like any other key.
"""

from __future__ import annotations

import numba
import numpy as np

from .broadword import U64, ctz64
from .eliasfano import DoubleEliasFano, ef_get_pair
from .ricecodec import RiceBitVector, read_code, skip_codes
from .signatures import LEVEL_STRIDE, bucket_of, remap, sign, sign_many
from .strategy import SplitStrategy


@numba.njit(cache=True)
def descend(words, fixed_pos, unary_pos, sig_lo, m, leaf_size,
            fanout_t, unit_t, rice_t, fixed_t, nodes_t):
    """Walk one tree from its root code.

    Returns ``(keys left of the leaf, leaf value, decoded codes)``.
    """
    c = 0
    depth = 0
    decoded = 0
    while m > leaf_size:
        v, fixed_pos, unary_pos = read_code(words, fixed_pos, unary_pos, rice_t[m])
        decoded += 1
        unit = unit_t[m]
        fanout = fanout_t[m]
        part = remap(sig_lo, depth * LEVEL_STRIDE + v, m) // unit
        if part > 0:
            fixed_pos, unary_pos = skip_codes(words, fixed_pos, unary_pos,
                                              part * fixed_t[unit], part * nodes_t[unit])
            c += part * unit
        if part < fanout - 1:
            m = unit
        else:
            m = m - (fanout - 1) * unit
        depth += 1
    if m <= 1:
        return c, 0, decoded
    v, fixed_pos, unary_pos = read_code(words, fixed_pos, unary_pos, rice_t[m])
    return c, remap(sig_lo, depth * LEVEL_STRIDE + v, m), decoded + 1


@numba.njit(cache=True)
def _lookup_one(sig_hi, sig_lo, nbuckets, ef_args, words, leaf_size,
                fanout_t, unit_t, rice_t, fixed_t, nodes_t):
    lower, width_a, width_b, upper_a, upper_b, jump, sub, delta_a, delta_b, beta = ef_args
    bucket = bucket_of(sig_hi, nbuckets)
    cum, cum_next, offset = ef_get_pair(lower, width_a, width_b, upper_a, upper_b, jump, sub,
                                        delta_a, delta_b, beta, bucket)
    m = cum_next - cum
    c, value, decoded = descend(words, offset, offset + fixed_t[m], sig_lo, m, leaf_size,
                                fanout_t, unit_t, rice_t, fixed_t, nodes_t)
    return cum + c + value, decoded


@numba.njit(cache=True, nogil=True)
def lookup_signatures(hi, lo, nbuckets, ef_args, words, leaf_size,
                      fanout_t, unit_t, rice_t, fixed_t, nodes_t, decoded_out):
    out = np.empty(len(hi), dtype=np.int64)
    trace = len(decoded_out) > 0
    for i in range(len(hi)):
        rank, decoded = _lookup_one(hi[i], lo[i], nbuckets, ef_args, words, leaf_size,
                                    fanout_t, unit_t, rice_t, fixed_t, nodes_t)
        out[i] = rank
        if trace:
            decoded_out[i] = decoded
    return out


@numba.njit(cache=True)
def _bucket_sizes(upper_a, lower, width_a, width_b, delta_a, count):
    sizes = np.empty(count - 1, dtype=np.int64)
    entry = width_a + width_b
    prev = 0
    ones = 0
    w = 0
    while ones < count:
        word = upper_a[w]
        while word != 0 and ones < count:
            p = 64 * w + np.int64(ctz64(word))
            word &= word - U64(1)
            lbits = U64(0)
            if width_a > 0:
                pos = ones * entry
                lbits = (lower[pos >> 6] >> U64(pos & 63))
                if (pos & 63) + width_a > 64:
                    lbits |= lower[(pos >> 6) + 1] << U64(64 - (pos & 63))
                lbits &= (U64(1) << U64(width_a)) - U64(1)
            value = (((p - ones) << width_a) | np.int64(lbits)) + ones * delta_a
            if ones > 0:
                sizes[ones - 1] = value - prev
            prev = value
            ones += 1
        w += 1
    return sizes


class RecSplitMphf:
    """A built minimal perfect hash function."""

    def __init__(self, leaf_size: int, bucket_size: int, seed: int, n: int, nbuckets: int,
                 ef: DoubleEliasFano, bits: RiceBitVector, *, strategy: SplitStrategy | None = None,
                 max_bucket: int | None = None):
        self.leaf_size = leaf_size
        self.bucket_size = bucket_size
        self.seed = seed
        self.n = n
        self.nbuckets = nbuckets
        self.ef = ef
        self.bits = bits
        self.strategy = strategy or SplitStrategy.for_bucket_size(leaf_size, bucket_size)
        if max_bucket is None:
            max_bucket = int(self.bucket_sizes().max()) if nbuckets else 0
        self.max_bucket = max_bucket
        self.tables = self.strategy.tables(max(max_bucket, 1))

    @property
    def beta(self) -> int:
        return self.ef.beta

    def bucket_sizes(self) -> np.ndarray:
        ef = self.ef
        if ef.count <= 1:
            return np.zeros(0, dtype=np.int64)
        return _bucket_sizes(ef.upper_a, ef.lower, ef.width_a, ef.width_b, ef.delta_a, ef.count)

    def _kernel_args(self):
        t = self.tables
        return (self.nbuckets, self.ef.kernel_args(), self.bits.words, self.leaf_size,
                t.fanout, t.unit, t.rice, t.fixed_bits, t.nodes)

    def evaluate_signatures(self, hi: np.ndarray, lo: np.ndarray,
                            decoded: np.ndarray | None = None) -> np.ndarray:
        """Ranks of many signatures; optionally records codes decoded per lookup."""
        self._require_keys()
        if decoded is None:
            decoded = np.zeros(0, dtype=np.int64)
        return lookup_signatures(np.asarray(hi, dtype=np.uint64), np.asarray(lo, dtype=np.uint64),
                                 *self._kernel_args(), decoded)

    def lookup(self, key: bytes) -> int:
        sig = sign(key, self.seed)
        return self.lookup_signature(sig.hi, sig.lo)

    __call__ = lookup

    def lookup_signature(self, sig_hi: int, sig_lo: int) -> int:
        self._require_keys()
        hi = np.array([sig_hi], dtype=np.uint64)
        lo = np.array([sig_lo], dtype=np.uint64)
        return int(self.evaluate_signatures(hi, lo)[0])

    def lookup_many(self, keys) -> np.ndarray:
        hi, lo = sign_many(keys, self.seed)
        return self.evaluate_signatures(hi, lo)

    def depth_bound(self) -> int:
        """Maximum number of codes a lookup decodes."""
        memo = {}

        def depth(m):
            if m <= 1:
                return 0
            if m <= self.leaf_size:
                return 1
            if m not in memo:
                fanout, unit = self.strategy.split_shape(m)
                last = m - (fanout - 1) * unit
                memo[m] = 1 + max(depth(unit), depth(last))
            return memo[m]

        return depth(max(self.max_bucket, 1))

    def size_bits(self) -> int:
        """Serialized size in bits, excluding the fixed header."""
        from .fileformat import payload_size

        return 8 * payload_size(self)

    def space_breakdown(self) -> dict[str, int]:
        """Serialized bits split into header, Elias-Fano section and tree parts."""
        from .fileformat import HEADER_SIZE, payload_size

        sizes = self.bucket_sizes()
        fixed = int(self.tables.fixed_bits[sizes].sum()) if len(sizes) else 0
        tree_bits = self.bits.bit_length
        rice_section = 64 + 64 * len(self.bits.stored_words())
        return {
            "header_bits": 8 * HEADER_SIZE,
            "ef_bits": 8 * payload_size(self) - rice_section,
            "fixed_bits": fixed,
            "unary_bits": tree_bits - fixed,
            "padding_bits": rice_section - tree_bits,
        }

    def bits_per_key(self) -> float:
        return self.size_bits() / self.n if self.n else 0.0

    def _require_keys(self):
        if self.n == 0:
            raise ValueError("lookup on an empty MPHF")

    def __len__(self):
        return self.n


def naive_lookup(mphf: RecSplitMphf, sig_hi: int, sig_lo: int) -> int:
    """Reference lookup: decode the whole bucket, then walk it without skip tables."""
    bucket = int(bucket_of(np.uint64(sig_hi), mphf.nbuckets))
    cum, cum_next, offset = mphf.ef.get_pair(bucket)
    m = cum_next - cum
    strategy = mphf.strategy
    leaf = mphf.leaf_size

    shape = []

    def collect(size):
        if size <= 1:
            return
        if size <= leaf:
            shape.append(strategy.leaf_rice_param(size))
            return
        shape.append(strategy.rice(size))
        for part in strategy.part_sizes(size):
            collect(part)

    collect(m)
    reader = mphf.bits.reader(offset, offset + sum(shape))
    codes = [reader.read_next(r) for r in shape]

    pos = 0

    def walk(size, depth, left):
        nonlocal pos
        if size <= 1:
            return left
        v = codes[pos]
        pos += 1
        func = depth * LEVEL_STRIDE + v
        if size <= leaf:
            return left + int(remap(np.uint64(sig_lo), np.uint64(func), size))
        parts = strategy.part_sizes(size)
        x = int(remap(np.uint64(sig_lo), np.uint64(func), size))
        bound = 0
        for k in parts:
            if x < bound + k:
                return walk(k, depth + 1, left)
            skip_subtree(k)
            left += k
            bound += k
        raise AssertionError("unreachable")

    def skip_subtree(size):
        nonlocal pos
        if size <= 1:
            return
        pos += 1
        if size > leaf:
            for k in strategy.part_sizes(size):
                skip_subtree(k)

    return cum + walk(m, 0, 0)
