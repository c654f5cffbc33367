"""RecSplit minimal perfect hashing.

>>> from recsplit import build
>>> mphf = build([b"alpha", b"beta", b"gamma"], leaf_size=8, bucket_size=100)
>>> sorted(mphf.lookup(k) for k in (b"alpha", b"beta", b"gamma"))
[0, 1, 2]

Keys outside the construction set map to arbitrary values in [0, n).
"""

from .builder import (
    BuildConfig,
    BuildError,
    DuplicateKeyError,
    SearchOverflowError,
    build,
    build_from_signatures,
)
from .eliasfano import DoubleEliasFano
from .evaluator import RecSplitMphf
from .fileformat import FormatError, deserialize, load, save, serialize
from .ricecodec import RiceBitVector
from .signatures import Signature, bucket_of, remap, sign, sign_many
from .strategy import NodeSpec, SplitStrategy

__all__ = [
    "BuildConfig",
    "BuildError",
    "DoubleEliasFano",
    "DuplicateKeyError",
    "FormatError",
    "NodeSpec",
    "RecSplitMphf",
    "RiceBitVector",
    "SearchOverflowError",
    "Signature",
    "SplitStrategy",
    "bucket_of",
    "build",
    "build_from_signatures",
    "deserialize",
    "load",
    "remap",
    "save",
    "serialize",
    "sign",
    "sign_many",
]
