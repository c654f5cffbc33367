"""Golomb-Rice coded splitting trees.

A bucket's codes are laid out in preorder, but split in two sections: first
the ``r``-bit fixed parts of all codes, then all unary parts. A value ``v``
with parameter ``r`` contributes its low ``r`` bits to the fixed section and
``v >> r`` zeros followed by a one to the unary section. Bits are LSB-first
in 64-bit words; buckets are packed back to back without alignment.

Skipping a subtree moves the fixed cursor by a precomputed amount and
advances the unary cursor past a precomputed number of ones.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numba
import numpy as np

from .broadword import U64, next_one, read_bits, select_from, words_for, write_bits


@numba.njit(cache=True, nogil=True)
def code_length(values, params, count):
    """Total bits taken by the first ``count`` codes."""
    total = 0
    for i in range(count):
        total += params[i] + (values[i] >> params[i]) + 1
    return total


@numba.njit(cache=True, nogil=True)
def encode_codes(words, pos, values, params, count):
    """Write codes in split layout at bit ``pos``; return the end position.

    ``words`` must be zero from ``pos`` on and large enough.
    """
    for i in range(count):
        write_bits(words, pos, values[i], params[i])
        pos += params[i]
    for i in range(count):
        pos += values[i] >> params[i]
        words[pos >> 6] |= U64(1) << U64(pos & 63)
        pos += 1
    return pos


@numba.njit(cache=True)
def read_code(words, fixed_pos, unary_pos, r):
    """Decode one value; returns ``(value, fixed_pos, unary_pos)``."""
    low = read_bits(words, fixed_pos, r)
    stop = next_one(words, unary_pos)
    value = (np.int64(stop - unary_pos) << r) | np.int64(low)
    return value, fixed_pos + r, stop + 1


@numba.njit(cache=True)
def skip_codes(words, fixed_pos, unary_pos, fixed_bits, nodes):
    """Skip a subtree of ``nodes`` codes whose fixed parts span ``fixed_bits``."""
    if nodes > 0:
        unary_pos = select_from(words, unary_pos, nodes - 1) + 1
    return fixed_pos + fixed_bits, unary_pos


@numba.njit(cache=True, nogil=True)
def append_bits(dst, dst_len, src, src_len):
    """Append the first ``src_len`` bits of ``src`` at bit ``dst_len`` of ``dst``."""
    nwords = (src_len + 63) >> 6
    for i in range(nwords):
        width = min(64, src_len - 64 * i)
        write_bits(dst, dst_len + 64 * i, src[i], width)
    return dst_len + src_len


def select_in_words(words: np.ndarray, start: int, k: int) -> int:
    """Position of the ``k``-th (1-based) one at or after bit ``start``."""
    if k < 1:
        raise ValueError("k is 1-based")
    return int(select_from(words, start, k - 1))


class RiceBitVector:
    """Immutable bit store holding the encoded trees of all buckets."""

    def __init__(self, words: np.ndarray, bit_length: int):
        self.words = np.ascontiguousarray(words, dtype=np.uint64)
        self.bit_length = int(bit_length)
        if len(self.words) < words_for(self.bit_length) + 1:
            # one spare zero word keeps word-straddling reads in bounds
            padded = np.zeros(words_for(self.bit_length) + 1, dtype=np.uint64)
            padded[: len(self.words)] = self.words
            self.words = padded

    def reader(self, fixed_pos: int, unary_pos: int) -> RiceReader:
        return RiceReader(self, fixed_pos, unary_pos)

    def stored_words(self) -> np.ndarray:
        """The words actually covering ``bit_length`` (what gets serialized)."""
        return self.words[: words_for(self.bit_length)]

    def __eq__(self, other):
        return (isinstance(other, RiceBitVector) and self.bit_length == other.bit_length
                and np.array_equal(self.stored_words(), other.stored_words()))


class RiceReader:
    """Cursor pair over a :class:`RiceBitVector`; one per lookup."""

    def __init__(self, bits: RiceBitVector, fixed_pos: int, unary_pos: int):
        self.bits = bits
        self.fixed_pos = fixed_pos
        self.unary_pos = unary_pos

    def read_next(self, rice_param: int) -> int:
        value, self.fixed_pos, self.unary_pos = read_code(
            self.bits.words, self.fixed_pos, self.unary_pos, rice_param)
        return int(value)

    def skip_subtree(self, fixed_bits: int, node_count: int) -> None:
        self.fixed_pos, self.unary_pos = skip_codes(
            self.bits.words, self.fixed_pos, self.unary_pos, fixed_bits, node_count)
        self.fixed_pos = int(self.fixed_pos)
        self.unary_pos = int(self.unary_pos)


def encode_bucket(codes: Iterable[tuple[int, int]]) -> RiceBitVector:
    """Encode a preorder list of ``(value, rice_param)`` pairs as one block."""
    codes = list(codes)
    values = np.array([v for v, _ in codes], dtype=np.int64)
    params = np.array([r for _, r in codes], dtype=np.int64)
    if (values < 0).any() or (params < 0).any():
        raise ValueError("values and parameters must be non-negative")
    nbits = int(code_length(values, params, len(codes)))
    words = np.zeros(words_for(nbits) + 1, dtype=np.uint64)
    end = encode_codes(words, 0, values, params, len(codes))
    assert end == nbits
    return RiceBitVector(words, nbits)


def decode_bucket(bits: RiceBitVector, start: int, params: Sequence[int]) -> list[int]:
    """Sequentially decode a block whose codes have the given parameters."""
    reader = bits.reader(start, start + sum(params))
    return [reader.read_next(r) for r in params]
