"""Key signatures, bucket assignment and the enumerated hash family.

A key is replaced by a 128-bit signature computed with MurmurHash3_x64_128,
where both internal lanes are initialised with the 64-bit seed (for seeds
below 2**32 this is the reference MurmurHash3_x64_128). The first output
lane ``h1`` is ``hi`` and drives bucketing; the second lane ``h2`` is ``lo``
and is the only input of split and bijection searches.

The i-th function of range ``k`` applied to a signature is::

    remap(lo, i, k) = (splitmix64_finalizer(lo + i) * k) >> 64

A node at depth ``d`` of a splitting tree searches the indices
``d * LEVEL_STRIDE + j`` for ``j = 0, 1, ...``; since ``j`` never reaches
``LEVEL_STRIDE``, the index ranges along any root-to-leaf path are disjoint.
"""

from typing import NamedTuple, Sequence

import numba
import numpy as np

from .broadword import U64, fixed_point_reduce, mulhi64

LEVEL_STRIDE = 1 << 32

_C1 = U64(0x87C37B91114253D5)
_C2 = U64(0x4CF5AD432745937F)


class Signature(NamedTuple):
    hi: int
    lo: int


@numba.njit(cache=True)
def _rotl(x, r):
    return (x << U64(r)) | (x >> U64(64 - r))


@numba.njit(cache=True)
def _fmix(k):
    k ^= k >> U64(33)
    k *= U64(0xFF51AFD7ED558CCD)
    k ^= k >> U64(33)
    k *= U64(0xC4CEB9FE1A85EC53)
    k ^= k >> U64(33)
    return k


@numba.njit(cache=True)
def _load64(data, start, nbytes):
    v = U64(0)
    for j in range(nbytes):
        v |= U64(data[start + j]) << U64(8 * j)
    return v


@numba.njit(cache=True)
def murmur3_128(data, start, length, seed):
    """MurmurHash3_x64_128 of ``data[start:start + length]``."""
    h1 = U64(seed)
    h2 = U64(seed)
    nblocks = length // 16
    for i in range(nblocks):
        base = start + 16 * i
        k1 = _load64(data, base, 8)
        k2 = _load64(data, base + 8, 8)
        k1 *= _C1
        k1 = _rotl(k1, 31)
        k1 *= _C2
        h1 ^= k1
        h1 = _rotl(h1, 27)
        h1 += h2
        h1 = h1 * U64(5) + U64(0x52DCE729)
        k2 *= _C2
        k2 = _rotl(k2, 33)
        k2 *= _C1
        h2 ^= k2
        h2 = _rotl(h2, 31)
        h2 += h1
        h2 = h2 * U64(5) + U64(0x38495AB5)
    tail = start + 16 * nblocks
    rem = length & 15
    if rem > 8:
        k2 = _load64(data, tail + 8, rem - 8)
        k2 *= _C2
        k2 = _rotl(k2, 33)
        k2 *= _C1
        h2 ^= k2
    if rem > 0:
        k1 = _load64(data, tail, min(rem, 8))
        k1 *= _C1
        k1 = _rotl(k1, 31)
        k1 *= _C2
        h1 ^= k1
    h1 ^= U64(length)
    h2 ^= U64(length)
    h1 += h2
    h2 += h1
    h1 = _fmix(h1)
    h2 = _fmix(h2)
    h1 += h2
    h2 += h1
    return h1, h2


@numba.njit(cache=True, nogil=True)
def hash_records(data, offsets, seed):
    """Signatures of the byte records ``data[offsets[i]:offsets[i + 1]]``."""
    n = len(offsets) - 1
    hi = np.empty(n, dtype=np.uint64)
    lo = np.empty(n, dtype=np.uint64)
    for i in range(n):
        h1, h2 = murmur3_128(data, offsets[i], offsets[i + 1] - offsets[i], seed)
        hi[i] = h1
        lo[i] = h2
    return hi, lo


@numba.njit(cache=True)
def remix(z):
    """SplitMix64 finalizer."""
    z = U64(z)
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@numba.njit(cache=True)
def remap(sig_lo, func_index, n):
    """Value of function ``func_index`` with range ``n`` (< 2**32) on ``sig_lo``."""
    return np.int64(fixed_point_reduce(remix(U64(sig_lo) + U64(func_index)), n))


@numba.njit(cache=True)
def bucket_of(sig_hi, nbuckets):
    """floor(sig_hi * nbuckets / 2**64)."""
    return np.int64(mulhi64(U64(sig_hi), U64(nbuckets)))


def sign(key: bytes, seed: int) -> Signature:
    """Signature of a single key."""
    buf = np.frombuffer(bytes(key), dtype=np.uint8)
    h1, h2 = murmur3_128(buf, 0, len(buf), U64(seed & 0xFFFFFFFFFFFFFFFF))
    return Signature(int(h1), int(h2))


def pack_keys(keys: Sequence[bytes]) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate keys into one byte buffer plus an offsets array."""
    lengths = np.fromiter((len(k) for k in keys), dtype=np.int64, count=len(keys))
    offsets = np.zeros(len(keys) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    data = np.frombuffer(b"".join(keys), dtype=np.uint8)
    if len(data) == 0:
        data = np.zeros(1, dtype=np.uint8)
    return data, offsets


def sign_many(keys, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Signatures of many keys, as ``(hi, lo)`` uint64 arrays.

    ``keys`` is either a sequence of byte strings or a 2-D uint8 array of
    fixed-width records.
    """
    seed = U64(seed & 0xFFFFFFFFFFFFFFFF)
    if isinstance(keys, np.ndarray) and keys.ndim == 2:
        n, width = keys.shape
        data = np.ascontiguousarray(keys, dtype=np.uint8).reshape(-1)
        if len(data) == 0:
            data = np.zeros(1, dtype=np.uint8)
        offsets = np.arange(n + 1, dtype=np.int64) * width
    else:
        data, offsets = pack_keys(list(keys))
    return hash_records(data, offsets, seed)
