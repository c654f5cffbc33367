"""Splitting strategy: tree shapes, Golomb-Rice parameters and skip tables.

For a leaf size ``l`` the strategy fixes, for every node size ``m > l``, how
the node is split:

* ``m <= s*l``: parts of ``l`` keys (fanout up to ``s``);
* ``m <= s*t*l``: parts of ``s*l`` keys (fanout up to ``t``);
* otherwise fanout 2 with a left part of ``ceil(floor(m/2) / (s*t*l)) * s*t*l``.

All parts have the unit size except possibly the last, so the whole tree
shape depends only on the number of keys.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

MAX_LEAF_SIZE = 24
MAX_RICE_PARAM = 31
DEFAULT_TABLE_LIMIT = 2000

_LOG_PHI = math.log((1 + math.sqrt(5)) / 2)


def lambda_(x: int) -> int:
    """Index of the highest set bit of ``x`` (``x >= 1``)."""
    if x <= 0:
        raise ValueError("lambda is undefined for x <= 0")
    return x.bit_length() - 1


def ilog2_round(x: int) -> int:
    """Integer approximation of round(lg x): lambda(x + x // 2)."""
    return lambda_(x + (x >> 1))


def lower_aggregation(leaf_size: int) -> int:
    """Leaves aggregated by the first split level: max(2, ceil(0.35 l + 0.5))."""
    return max(2, -(-(35 * leaf_size + 50) // 100))


def upper_aggregation(leaf_size: int) -> int:
    """Fanout of the second split level: ceil(0.21 l + 0.9), or 2 below l = 7."""
    if leaf_size < 7:
        return 2
    return -(-(21 * leaf_size + 90) // 100)


def split_probability(part_sizes: Sequence[int]) -> Fraction:
    """Probability that a random map m -> m splits keys into the given parts."""
    if any(k < 1 for k in part_sizes):
        raise ValueError("parts must be positive")
    m = sum(part_sizes)
    num = math.factorial(m)
    den = m**m
    for k in part_sizes:
        num *= k**k
        den *= math.factorial(k)
    return Fraction(num, den)


def bijection_probability(m: int) -> Fraction:
    """m! / m^m."""
    if m < 1:
        raise ValueError("m must be positive")
    return Fraction(math.factorial(m), m**m)


def log_split_probability(part_sizes: Sequence[int]) -> float:
    """Natural log of :func:`split_probability`, via lgamma."""
    m = sum(part_sizes)
    lp = math.lgamma(m + 1) - m * math.log(m)
    for k in part_sizes:
        lp += k * math.log(k) - math.lgamma(k + 1)
    return min(lp, 0.0)


def rice_param(p) -> int:
    """Optimal Golomb-Rice parameter for a geometric source of success rate ``p``."""
    p = float(p)
    if not 0 < p <= 1:
        raise ValueError("p must be in (0, 1]")
    if p >= 1:
        return 0
    ratio = -_LOG_PHI / math.log1p(-p)
    if ratio <= 1:
        return 0
    return math.ceil(math.log2(ratio))


def rice_param_from_log(log_p: float) -> int:
    """:func:`rice_param` for a probability given by its natural log."""
    if log_p >= 0:
        return 0
    p = math.exp(log_p)
    if p < 1e-12:
        # log1p(-p) == -p to double precision
        ratio_log2 = (math.log(_LOG_PHI) - log_p) / math.log(2)
        return max(0, math.ceil(ratio_log2))
    return rice_param(p)


def rice_param_approx(m: int, part_sizes: Sequence[int]) -> int:
    """Integer-only approximation of the split Rice parameter."""
    s = len(part_sizes)
    acc = (((s - 1) * 5) >> 1) + sum(ilog2_round(k) for k in part_sizes) - lambda_(m)
    return max(0, acc >> 1)


@dataclass(frozen=True)
class NodeSpec:
    fanout: int
    unit: int
    part_sizes: tuple[int, ...]
    rice_param: int
    subtree_fixed_bits: int
    subtree_nodes: int


@dataclass(frozen=True)
class StrategyTables:
    """Flat per-size arrays consumed by the compiled build and lookup kernels.

    For leaves (``m <= leaf_size``) ``fanout`` and ``unit`` are zero.
    """

    fanout: np.ndarray
    unit: np.ndarray
    rice: np.ndarray
    fixed_bits: np.ndarray
    nodes: np.ndarray

    @property
    def max_size(self) -> int:
        return len(self.rice) - 1


class SplitStrategy:
    """Deterministic splitting strategy for a leaf size.

    ``table_limit`` is the largest node size whose Rice parameter is derived
    from the exact split probability; larger nodes use
    :func:`rice_param_approx`.
    """

    def __init__(self, leaf_size: int, table_limit: int = DEFAULT_TABLE_LIMIT):
        if not 1 <= leaf_size <= MAX_LEAF_SIZE:
            raise ValueError(f"leaf size must be in [1, {MAX_LEAF_SIZE}]")
        self.leaf_size = leaf_size
        self.lower_aggr = lower_aggregation(leaf_size)
        self.upper_aggr = self.lower_aggr * upper_aggregation(leaf_size)
        self.lower_unit = self.lower_aggr * leaf_size
        self.upper_unit = self.upper_aggr * leaf_size
        self.table_limit = table_limit
        self._fixed = [0]
        self._nodes = [0]
        self._rice = [0]

    @classmethod
    def for_bucket_size(cls, leaf_size: int, bucket_size: int) -> SplitStrategy:
        return cls(leaf_size, max(2 * bucket_size, DEFAULT_TABLE_LIMIT))

    def split_shape(self, m: int) -> tuple[int, int]:
        """``(fanout, unit)`` for a node of ``m > leaf_size`` keys."""
        if m <= self.leaf_size:
            raise ValueError(f"node of size {m} is a leaf")
        if m <= self.lower_unit:
            unit = self.leaf_size
        elif m <= self.upper_unit:
            unit = self.lower_unit
        else:
            unit = -(-(m // 2) // self.upper_unit) * self.upper_unit
        return -(-m // unit), unit

    def part_sizes(self, m: int) -> tuple[int, ...]:
        fanout, unit = self.split_shape(m)
        return (unit,) * (fanout - 1) + (m - (fanout - 1) * unit,)

    def leaf_rice_param(self, m: int) -> int:
        return _leaf_rice(m)

    def split_rice_param(self, m: int) -> int:
        parts = self.part_sizes(m)
        if m <= self.table_limit:
            return min(MAX_RICE_PARAM, rice_param_from_log(log_split_probability(parts)))
        return min(MAX_RICE_PARAM, rice_param_approx(m, parts))

    def _extend(self, m: int) -> None:
        for size in range(len(self._fixed), m + 1):
            if size == 1:
                fixed, nodes, r = 0, 0, 0
            elif size <= self.leaf_size:
                r = _leaf_rice(size)
                fixed, nodes = r, 1
            else:
                fanout, unit = self.split_shape(size)
                last = size - (fanout - 1) * unit
                r = self.split_rice_param(size)
                fixed = r + (fanout - 1) * self._fixed[unit] + self._fixed[last]
                nodes = 1 + (fanout - 1) * self._nodes[unit] + self._nodes[last]
            self._fixed.append(fixed)
            self._nodes.append(nodes)
            self._rice.append(r)

    def rice(self, m: int) -> int:
        """Rice parameter of the code stored for a node of ``m`` keys."""
        self._extend(m)
        return self._rice[m]

    def skip_info(self, m: int) -> tuple[int, int]:
        """``(fixed bits, coded nodes)`` of the whole subtree over ``m`` keys."""
        if m < 0:
            raise ValueError("negative size")
        self._extend(m)
        return self._fixed[m], self._nodes[m]

    def node_spec(self, m: int) -> NodeSpec:
        fanout, unit = self.split_shape(m)
        fixed, nodes = self.skip_info(m)
        return NodeSpec(fanout, unit, self.part_sizes(m), self.rice(m), fixed, nodes)

    def tables(self, max_size: int) -> StrategyTables:
        max_size = max(max_size, self.leaf_size, 1)
        self._extend(max_size)
        fanout = np.zeros(max_size + 1, dtype=np.int64)
        unit = np.zeros(max_size + 1, dtype=np.int64)
        for m in range(self.leaf_size + 1, max_size + 1):
            fanout[m], unit[m] = self.split_shape(m)
        return StrategyTables(
            fanout=fanout,
            unit=unit,
            rice=np.array(self._rice[: max_size + 1], dtype=np.int64),
            fixed_bits=np.array(self._fixed[: max_size + 1], dtype=np.int64),
            nodes=np.array(self._nodes[: max_size + 1], dtype=np.int64),
        )


@lru_cache(maxsize=None)
def _leaf_rice(m: int) -> int:
    if m <= 1:
        return 0
    return rice_param(bijection_probability(m))
