"""Binary serialization of a :class:`RecSplitMphf`.

All integers are little-endian; arrays are written as 64-bit words except
the 16-bit relative select inventory, which is zero-padded to a multiple of
8 bytes. Layout::

    header (46 bytes)
        magic        8s   b"RECSPLIT"
        version      u32
        leaf_size    u16
        bucket_size  u32
        n            u64
        seed         u64
        beta         u32  (12.20 fixed point)
        nbuckets     u64
    Elias-Fano section
        count u64, delta_a i64, delta_b i64, width_a u32, width_b u32,
        upper_bits_a u64, upper_bits_b u64, flags u32 (bit 0: wide inventory),
        lengths of lower, upper_a, upper_b, jump, sub (u64 each, in elements),
        then the five arrays in that order
    Rice section
        bit_length u64, then ceil(bit_length / 64) words

Bit order inside words is LSB first. The signature hash (see
``recsplit.signatures``) is part of the format: files are only meaningful
together with that exact hash definition.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .broadword import words_for
from .eliasfano import DoubleEliasFano
from .evaluator import RecSplitMphf
from .ricecodec import RiceBitVector

MAGIC = b"RECSPLIT"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<8sIHIQQIQ")
_EF_HEADER = struct.Struct("<QqqIIQQI5Q")
_RICE_HEADER = struct.Struct("<Q")
HEADER_SIZE = _HEADER.size

_WIDE = 1


class FormatError(ValueError):
    pass


def _padded(nbytes: int) -> int:
    return (nbytes + 7) & ~7


def payload_size(mphf: RecSplitMphf) -> int:
    """Serialized size in bytes, excluding the fixed header."""
    arrays = mphf.ef.stored_arrays()
    ef_bytes = _EF_HEADER.size + sum(_padded(a.nbytes) for a in arrays.values())
    rice_bytes = _RICE_HEADER.size + 8 * words_for(mphf.bits.bit_length)
    return ef_bytes + rice_bytes


def serialize(mphf: RecSplitMphf) -> bytes:
    ef = mphf.ef
    arrays = ef.stored_arrays()
    parts = [
        _HEADER.pack(MAGIC, FORMAT_VERSION, mphf.leaf_size, mphf.bucket_size, mphf.n,
                     mphf.seed, ef.beta, mphf.nbuckets),
        _EF_HEADER.pack(ef.count, ef.delta_a, ef.delta_b, ef.width_a, ef.width_b,
                        ef.upper_bits_a, ef.upper_bits_b, _WIDE if ef.wide_inventory else 0,
                        *(len(a) for a in arrays.values())),
    ]
    for a in arrays.values():
        raw = a.astype(a.dtype.newbyteorder("<"), copy=False).tobytes()
        parts.append(raw + bytes(_padded(len(raw)) - len(raw)))
    parts.append(_RICE_HEADER.pack(mphf.bits.bit_length))
    parts.append(mphf.bits.stored_words().astype("<u8", copy=False).tobytes())
    return b"".join(parts)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def unpack(self, fmt: struct.Struct) -> tuple:
        if self.pos + fmt.size > len(self.data):
            raise FormatError("truncated file")
        out = fmt.unpack_from(self.data, self.pos)
        self.pos += fmt.size
        return out

    def array(self, count: int, dtype: str, pad_words: int = 0) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        nbytes = count * itemsize
        if self.pos + nbytes > len(self.data):
            raise FormatError("truncated file")
        out = np.zeros(count + pad_words, dtype=np.dtype(dtype).newbyteorder("="))
        out[:count] = np.frombuffer(self.data, dtype=dtype, count=count, offset=self.pos)
        self.pos += _padded(nbytes)
        return out


def deserialize(data: bytes) -> RecSplitMphf:
    cur = _Cursor(data)
    magic, version, leaf, bucket, n, seed, beta, nbuckets = cur.unpack(_HEADER)
    if magic != MAGIC:
        raise FormatError("not a RecSplit file")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    (count, delta_a, delta_b, width_a, width_b, bits_a, bits_b, flags,
     n_lower, n_upper_a, n_upper_b, n_jump, n_sub) = cur.unpack(_EF_HEADER)
    if count != nbuckets + 1:
        raise FormatError("inconsistent bucket count")
    # one spare word keeps straddling reads in bounds, as after a build
    lower = cur.array(n_lower, "<u8", pad_words=1)
    upper_a = cur.array(n_upper_a, "<u8", pad_words=1)
    upper_b = cur.array(n_upper_b, "<u8", pad_words=1)
    jump = cur.array(n_jump, "<u8")
    sub = cur.array(n_sub, "<u8" if flags & _WIDE else "<u2")
    ef = DoubleEliasFano(count, beta, delta_a, delta_b, width_a, width_b, bits_a, bits_b,
                         lower, upper_a, upper_b, jump, sub)
    (bit_length,) = cur.unpack(_RICE_HEADER)
    words = cur.array(words_for(bit_length), "<u8")
    if cur.pos != len(data):
        raise FormatError("trailing bytes after structure")
    return RecSplitMphf(leaf, bucket, seed, n, nbuckets, ef, RiceBitVector(words, bit_length))


def save(mphf: RecSplitMphf, path) -> int:
    """Write ``mphf`` to ``path``; returns the number of bytes written."""
    data = serialize(mphf)
    Path(path).write_bytes(data)
    return len(data)


def load(path) -> RecSplitMphf:
    return deserialize(Path(path).read_bytes())
