"""Word-level bit primitives shared by the succinct structures.

Everything here is compiled with numba and operates on ``uint64`` words
stored LSB-first: bit ``i`` of a bit array lives in word ``i >> 6`` at
position ``i & 63``.
"""

import numba
import numpy as np
from numba import types
from numba.extending import intrinsic

U64 = np.uint64
MASK32 = U64(0xFFFFFFFF)
ONES_STEP_8 = U64(0x0101010101010101)
MSBS_STEP_8 = U64(0x8080808080808080)


@intrinsic
def popcount64(tyctx, x):
    """LLVM ``ctpop`` on an integer word."""
    if isinstance(x, types.Integer):
        def impl(cgctx, builder, sig, args):
            return builder.ctpop(args[0])
        return x(x), impl


@intrinsic
def ctz64(tyctx, x):
    """Count trailing zeros; undefined for zero input."""
    if isinstance(x, types.Integer):
        def impl(cgctx, builder, sig, args):
            return builder.cttz(args[0], cgctx.get_constant(types.boolean, True))
        return x(x), impl


@numba.njit(cache=True)
def mulhi64(a, b):
    """High 64 bits of the 128-bit product of two uint64 values."""
    a = U64(a)
    b = U64(b)
    a_lo = a & MASK32
    a_hi = a >> U64(32)
    b_lo = b & MASK32
    b_hi = b >> U64(32)
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    hi_hi = a_hi * b_hi
    cross = (lo_lo >> U64(32)) + (hi_lo & MASK32) + lo_hi
    return (cross >> U64(32)) + (hi_lo >> U64(32)) + hi_hi


@numba.njit(cache=True)
def fixed_point_reduce(h, n):
    """floor(h * n / 2**64) for n < 2**32, using two 32x32 products."""
    h = U64(h)
    n = U64(n)
    return ((h >> U64(32)) * n + (((h & MASK32) * n) >> U64(32))) >> U64(32)


@numba.njit(cache=True)
def select64(x, k):
    """Position of the ``k``-th (0-based) set bit of ``x``.

    Byte-parallel prefix popcounts locate the byte, then a short scan
    finishes inside it. Requires ``k < popcount(x)``.
    """
    x = U64(x)
    k = U64(k)
    byte_sums = x - ((x & U64(0xAAAAAAAAAAAAAAAA)) >> U64(1))
    byte_sums = (byte_sums & U64(0x3333333333333333)) + (
        (byte_sums >> U64(2)) & U64(0x3333333333333333))
    byte_sums = (byte_sums + (byte_sums >> U64(4))) & U64(0x0F0F0F0F0F0F0F0F)
    byte_sums = byte_sums * ONES_STEP_8
    k_step_8 = k * ONES_STEP_8
    # per byte: MSB set iff prefix count <= k
    leq = ((((k_step_8 | MSBS_STEP_8) - (byte_sums & ~MSBS_STEP_8))
            ^ byte_sums ^ k_step_8) & MSBS_STEP_8) >> U64(7)
    place = ((leq * ONES_STEP_8) >> U64(53)) & ~U64(7)
    byte_rank = k - (((byte_sums << U64(8)) >> place) & U64(0xFF))
    byte = (x >> place) & U64(0xFF)
    for _ in range(byte_rank):
        byte &= byte - U64(1)
    return np.int64(place + ctz64(byte))


@numba.njit(cache=True)
def read_bits(words, pos, width):
    """Read ``width`` (<= 64) bits starting at bit ``pos``."""
    if width == 0:
        return U64(0)
    w = pos >> 6
    off = U64(pos & 63)
    val = words[w] >> off
    if off + U64(width) > U64(64):
        val |= words[w + 1] << (U64(64) - off)
    if width < 64:
        val &= (U64(1) << U64(width)) - U64(1)
    return val


@numba.njit(cache=True)
def write_bits(words, pos, value, width):
    """OR ``width`` (<= 64) low bits of ``value`` into ``words`` at ``pos``.

    Target bits must be zero.
    """
    if width == 0:
        return
    value = U64(value)
    if width < 64:
        value &= (U64(1) << U64(width)) - U64(1)
    w = pos >> 6
    off = U64(pos & 63)
    words[w] |= value << off
    if off + U64(width) > U64(64):
        words[w + 1] |= value >> (U64(64) - off)


@numba.njit(cache=True)
def next_one(words, pos):
    """Position of the first set bit at or after ``pos``."""
    w = pos >> 6
    word = words[w] & (~U64(0) << U64(pos & 63))
    while word == 0:
        w += 1
        word = words[w]
    return (w << 6) + np.int64(ctz64(word))


@numba.njit(cache=True)
def select_from(words, pos, k):
    """Position of the ``k``-th (0-based) set bit at or after ``pos``."""
    w = pos >> 6
    word = words[w] & (~U64(0) << U64(pos & 63))
    c = np.int64(popcount64(word))
    while c <= k:
        k -= c
        w += 1
        word = words[w]
        c = np.int64(popcount64(word))
    return (w << 6) + select64(word, k)


def words_for(nbits):
    """Number of 64-bit words needed for ``nbits`` bits."""
    return (nbits + 63) >> 6
