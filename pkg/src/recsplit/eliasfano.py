"""Double Elias-Fano list of bucket prefix sums and bucket bit offsets.

Two lists of equal length are stored: ``A[i]`` the number of keys in buckets
before ``i`` and ``B[i] = offset[i] - floor(beta * A[i] / 2**20)``, where
``beta`` is the average number of tree bits per key in 12.20 fixed point.
Each list is first rescaled by subtracting ``i * delta``, where ``delta`` is its minimum gap
(possibly negative), making it non-decreasing and starting at zero.

Layout:

* ``lower``: per entry, ``width_a`` low bits of A then ``width_b`` low bits of
  B, packed contiguously;
* ``upper_a``, ``upper_b``: unary-coded high parts (entry ``i`` sets bit
  ``(y_i >> width) + i``);
* ``jump``: absolute positions of every 2**14-th one, interleaved A/B;
* ``sub``: positions of every 2**8-th one relative to the preceding ``jump``
  entry, interleaved A/B, as uint16. If some relative position does not fit
  in 16 bits, ``sub`` instead holds absolute uint64 positions and ``jump``
  is left empty.
"""

from __future__ import annotations

from typing import Sequence

import numba
import numpy as np

from .broadword import U64, next_one, read_bits, select_from, words_for, write_bits

BETA_SHIFT = 20
JUMP_SHIFT = 14
SUB_SHIFT = 8
_SUBS_PER_JUMP = 1 << (JUMP_SHIFT - SUB_SHIFT)


def lower_width(upper_bound: int, count: int) -> int:
    """max(0, floor(lg(u / n))) computed with integers."""
    if count <= 0 or upper_bound < count:
        return 0
    return (upper_bound // count).bit_length() - 1


@numba.njit(cache=True)
def _fill_upper(values, width):
    n = len(values)
    nbits = (values[n - 1] >> width) + n
    words = np.zeros(((nbits + 63) >> 6) + 1, dtype=np.uint64)
    for i in range(n):
        p = (values[i] >> width) + i
        words[p >> 6] |= U64(1) << U64(p & 63)
    return words, nbits


@numba.njit(cache=True)
def _one_positions(values, width, step_shift):
    n = len(values)
    out = np.empty(((n - 1) >> step_shift) + 1, dtype=np.int64)
    for j in range(len(out)):
        k = j << step_shift
        out[j] = (values[k] >> width) + k
    return out


@numba.njit(cache=True)
def _fill_lower(ya, wa, yb, wb):
    n = len(ya)
    words = np.zeros(((n * (wa + wb) + 63) >> 6) + 1, dtype=np.uint64)
    for i in range(n):
        pos = i * (wa + wb)
        write_bits(words, pos, U64(ya[i]), wa)
        write_bits(words, pos + wa, U64(yb[i]), wb)
    return words


@numba.njit(cache=True)
def scale_by_beta(beta, count):
    """floor(beta * count / 2**20) without 64-bit overflow for count < 2**44."""
    return beta * (count >> BETA_SHIFT) + ((beta * (count & ((1 << BETA_SHIFT) - 1))) >> BETA_SHIFT)


@numba.njit(cache=True)
def ef_select(upper, jump, sub, which, k):
    """Position of the ``k``-th one of upper array ``which`` (0 = A, 1 = B)."""
    if len(jump) > 0:
        pos = np.int64(jump[2 * (k >> 14) + which]) + np.int64(sub[2 * (k >> 8) + which])
    else:
        pos = np.int64(sub[2 * (k >> 8) + which])
    rem = k & 255
    if rem == 0:
        return pos
    return select_from(upper, pos + 1, rem - 1)


@numba.njit(cache=True)
def ef_get_pair(lower, width_a, width_b, upper_a, upper_b, jump, sub,
                delta_a, delta_b, beta, i):
    """``(A[i], A[i + 1], offset[i])`` from the packed representation."""
    entry = width_a + width_b
    pa = ef_select(upper_a, jump, sub, 0, i)
    pa_next = next_one(upper_a, pa + 1)
    pb = ef_select(upper_b, jump, sub, 1, i)
    pos = i * entry
    la = np.int64(read_bits(lower, pos, width_a))
    lb = np.int64(read_bits(lower, pos + width_a, width_b))
    la_next = np.int64(read_bits(lower, pos + entry, width_a))
    ya = ((pa - i) << width_a) | la
    ya_next = ((pa_next - i - 1) << width_a) | la_next
    yb = ((pb - i) << width_b) | lb
    cum = ya + i * delta_a
    cum_next = ya_next + (i + 1) * delta_a
    offset = yb + i * delta_b + scale_by_beta(beta, cum)
    return cum, cum_next, offset


class DoubleEliasFano:
    """Compressed pair of monotone per-bucket lists."""

    def __init__(self, count, beta, delta_a, delta_b, width_a, width_b,
                 upper_bits_a, upper_bits_b, lower, upper_a, upper_b, jump, sub):
        self.count = int(count)
        self.beta = int(beta)
        self.delta_a = int(delta_a)
        self.delta_b = int(delta_b)
        self.width_a = int(width_a)
        self.width_b = int(width_b)
        self.upper_bits_a = int(upper_bits_a)
        self.upper_bits_b = int(upper_bits_b)
        self.lower = lower
        self.upper_a = upper_a
        self.upper_b = upper_b
        self.jump = jump
        self.sub = sub

    @property
    def wide_inventory(self) -> bool:
        return self.sub.dtype == np.uint64

    @classmethod
    def build(cls, cum_keys: Sequence[int], bit_offsets: Sequence[int], beta: int) -> DoubleEliasFano:
        """``beta`` is a 12.20 fixed-point scale (``0 <= beta < 2**32``)."""
        if not 0 <= beta < 1 << 32:
            raise ValueError("beta must fit in 32 bits")
        cum = np.asarray(cum_keys, dtype=np.int64)
        off = np.asarray(bit_offsets, dtype=np.int64)
        if cum.shape != off.shape or len(cum) == 0:
            raise ValueError("lists must be non-empty and of equal length")
        if cum[0] != 0 or off[0] != 0:
            raise ValueError("lists must start at zero")
        if (np.diff(cum) < 0).any() or (np.diff(off) < 0).any():
            raise ValueError("lists must be non-decreasing")
        n = len(cum)
        rescaled = []
        deltas = []
        for values in (cum, off - scale_by_beta(beta, cum)):
            delta = int(np.diff(values).min()) if n > 1 else 0
            y = values - np.arange(n, dtype=np.int64) * delta
            deltas.append(delta)
            rescaled.append(y)
        ya, yb = rescaled
        wa = lower_width(int(ya[-1]), n)
        wb = lower_width(int(yb[-1]), n)
        upper_a, bits_a = _fill_upper(ya, wa)
        upper_b, bits_b = _fill_upper(yb, wb)
        lower = _fill_lower(ya, wa, yb, wb)

        abs_a = _one_positions(ya, wa, SUB_SHIFT)
        abs_b = _one_positions(yb, wb, SUB_SHIFT)
        jump_a = abs_a[::_SUBS_PER_JUMP]
        jump_b = abs_b[::_SUBS_PER_JUMP]
        rel_a = abs_a - np.repeat(jump_a, _SUBS_PER_JUMP)[: len(abs_a)]
        rel_b = abs_b - np.repeat(jump_b, _SUBS_PER_JUMP)[: len(abs_b)]
        if max(rel_a.max(), rel_b.max()) < (1 << 16):
            jump = _interleave(jump_a, jump_b, np.uint64)
            sub = _interleave(rel_a, rel_b, np.uint16)
        else:
            jump = np.zeros(0, dtype=np.uint64)
            sub = _interleave(abs_a, abs_b, np.uint64)
        return cls(n, beta, deltas[0], deltas[1], wa, wb, bits_a, bits_b,
                   lower, upper_a, upper_b, jump, sub)

    def select_upper(self, which: int, k: int) -> int:
        """Position of the ``k``-th (0-based) one in upper array A (0) or B (1)."""
        if not 0 <= k < self.count:
            raise IndexError(k)
        upper = self.upper_a if which == 0 else self.upper_b
        return int(ef_select(upper, self.jump, self.sub, which, k))

    def get_pair(self, i: int) -> tuple[int, int, int]:
        """``(cum_keys[i], cum_keys[i + 1], bit_offsets[i])``."""
        if not 0 <= i < self.count - 1:
            raise IndexError(i)
        return tuple(int(v) for v in ef_get_pair(*self.kernel_args(), i))

    def get(self, i: int) -> tuple[int, int]:
        """``(cum_keys[i], bit_offsets[i])``."""
        if not 0 <= i < self.count:
            raise IndexError(i)
        pa = self.select_upper(0, i)
        pb = self.select_upper(1, i)
        pos = i * (self.width_a + self.width_b)
        la = int(read_bits(self.lower, pos, self.width_a))
        lb = int(read_bits(self.lower, pos + self.width_a, self.width_b))
        cum = (((pa - i) << self.width_a) | la) + i * self.delta_a
        rest = (((pb - i) << self.width_b) | lb) + i * self.delta_b
        return cum, rest + ((self.beta * cum) >> BETA_SHIFT)

    def kernel_args(self) -> tuple:
        return (self.lower, self.width_a, self.width_b, self.upper_a, self.upper_b,
                self.jump, self.sub, self.delta_a, self.delta_b, self.beta)

    def stored_arrays(self) -> dict[str, np.ndarray]:
        """Arrays as serialized (trailing padding words removed)."""
        return {
            "lower": self.lower[: words_for(self.count * (self.width_a + self.width_b))],
            "upper_a": self.upper_a[: words_for(self.upper_bits_a)],
            "upper_b": self.upper_b[: words_for(self.upper_bits_b)],
            "jump": self.jump,
            "sub": self.sub,
        }

    def size_bits(self) -> int:
        """Bits of the stored arrays (excluding scalar fields)."""
        return sum(a.nbytes * 8 for a in self.stored_arrays().values())


def _interleave(a, b, dtype):
    out = np.empty(2 * len(a), dtype=dtype)
    out[0::2] = a
    out[1::2] = b
    return out
