"""Exact probability oracles, space models and the benchmark reporter.

Everything probabilistic here is exact rational arithmetic unless the name
says otherwise; floats only appear in asymptotic formulas and code-length
expectations.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import astuple, dataclass, fields
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from .strategy import (
    SplitStrategy,
    bijection_probability,
    log_split_probability,
    rice_param,
    split_probability,
)

GOLDEN_RATIO = (1 + math.sqrt(5)) / 2

# A tree shape is either a leaf size or a tuple of child shapes.
Shape = Union[int, tuple]


def expected_split_trials(part_sizes: Sequence[int]) -> Fraction:
    """Mean number of functions tried before a split succeeds: 1 / p."""
    return 1 / split_probability(part_sizes)


def expected_bijection_trials(m: int) -> Fraction:
    """m^m / m!."""
    return 1 / bijection_probability(m)


def asymptotic_split_trials(part_sizes: Sequence[int]) -> float:
    """sqrt((2 pi)^(s-1) * prod(k_i) / m)."""
    m = sum(part_sizes)
    s = len(part_sizes)
    return math.sqrt((2 * math.pi) ** (s - 1) * math.prod(part_sizes) / m)


def asymptotic_bijection_trials(m: int) -> float:
    """e^m / sqrt(2 pi m)."""
    return math.exp(m) / math.sqrt(2 * math.pi * m)


def strategy_tree(strategy: SplitStrategy, m: int) -> Shape:
    """Shape of the splitting tree the strategy prescribes for ``m`` keys."""
    if m <= strategy.leaf_size:
        return m
    return tuple(strategy_tree(strategy, k) for k in strategy.part_sizes(m))


def shape_size(shape: Shape) -> int:
    if isinstance(shape, int):
        return shape
    return sum(shape_size(c) for c in shape)


def tree_probability(shape: Shape,
                     split_prob: Callable[[Sequence[int]], Fraction] = split_probability,
                     leaf_prob: Callable[[int], Fraction] = bijection_probability) -> Fraction:
    """Product of split probabilities over internal nodes and bijection
    probabilities over leaves."""
    if isinstance(shape, int):
        return leaf_prob(shape)
    prob = split_prob([shape_size(c) for c in shape])
    for child in shape:
        prob *= tree_probability(child, split_prob, leaf_prob)
    return prob


def verify_invariance(shape: Shape,
                      split_prob: Callable[[Sequence[int]], Fraction] = split_probability,
                      leaf_prob: Callable[[int], Fraction] = bijection_probability) -> bool:
    """True iff the tree's success probability equals m!/m^m exactly.

    The probability functions are parameters so that a perturbed model can
    be checked to fail.
    """
    m = shape_size(shape)
    return tree_probability(shape, split_prob, leaf_prob) == bijection_probability(m)


def expected_unary_length(p: float, r: int) -> float:
    """Mean length of the unary part, 1 / (1 - (1-p)^(2^r))."""
    if not 0 < p <= 1:
        raise ValueError("p must be in (0, 1]")
    q = math.exp(math.log1p(-p) * 2.0**r) if p < 1 else 0.0
    return 1 / (1 - q)


def expected_code_length(p: float, r: int) -> float:
    """Mean Golomb-Rice code length of a geometric variable with success rate p."""
    return r + expected_unary_length(p, r)


def summed_code_length(p: float, r: int, tail: float = 1e-12, chunk: int = 1 << 16) -> float:
    """Mean code length by summing P(k) * len(k) term by term.

    Summation proceeds in chunks and stops once the remaining probability
    mass is below ``tail``.
    """
    if p >= 1:
        return r + 1.0
    log_q = math.log1p(-p)
    total = 0.0
    start = 0
    while True:
        k = np.arange(start, start + chunk, dtype=np.float64)
        prob = np.exp(k * log_q) * p
        total += float(np.dot(prob, r + 1 + np.floor(k / 2.0**r)))
        start += chunk
        if math.exp(start * log_q) < tail:
            return total


def brute_force_rice_param(p: float, max_param: int = 32) -> int:
    """First r in [0, max_param) minimizing :func:`summed_code_length`."""
    best_r, best = 0, math.inf
    for r in range(max_param):
        length = summed_code_length(p, r)
        if length < best:
            best_r, best = r, length
        elif r > best_r + 2:
            # lengths are convex in r: once past the minimum they only grow
            break
    return best_r


def expected_tree_bits(strategy: SplitStrategy, m: int) -> float:
    """Expected encoded size in bits of a splitting tree over ``m`` keys."""
    memo = {}

    def bits(size: int) -> float:
        if size <= 1:
            return 0.0
        if size in memo:
            return memo[size]
        r = strategy.rice(size)
        if size <= strategy.leaf_size:
            value = expected_code_length(float(bijection_probability(size)), r)
        else:
            parts = strategy.part_sizes(size)
            p = math.exp(log_split_probability(parts))
            value = expected_code_length(p, r) + sum(bits(k) for k in parts)
        memo[size] = value
        return value

    return bits(m)


def expected_tree_bits_per_key(leaf_size: int, bucket_size: int) -> float:
    """Expected tree bits per key when bucket sizes are Poisson(bucket_size)."""
    strategy = SplitStrategy.for_bucket_size(leaf_size, bucket_size)
    b = bucket_size
    total = 0.0
    hi = int(b + 12 * math.sqrt(b) + 30)
    for m in range(1, hi):
        log_pm = -b + m * math.log(b) - math.lgamma(m + 1)
        total += math.exp(log_pm) * expected_tree_bits(strategy, m)
    return total / b


def random_keys(n: int, seed: int = 42) -> np.ndarray:
    """``n`` random 16-byte keys as an ``(n, 16)`` uint8 array."""
    return np.random.default_rng(seed).integers(0, 256, size=(n, 16), dtype=np.uint8)


@dataclass(frozen=True)
class BenchRow:
    leaf_size: int
    bucket_size: int
    n: int
    bits_per_key: float
    build_ns_per_key: float
    lookup_ns_per_key: float


def bench(leaf_size: int, bucket_size: int, n: int, lookups: int = 1_000_000,
          seed: int = 0, threads: int | None = None, key_seed: int = 42) -> BenchRow:
    """Build over ``n`` random 16-byte keys and time construction and lookups.

    Lookup time includes hashing the key.
    """
    from .builder import BuildConfig, build

    keys = random_keys(n, key_seed)
    rng = np.random.default_rng(key_seed + 1)
    config = BuildConfig(leaf_size=leaf_size, bucket_size=bucket_size, seed=seed,
                         **({} if threads is None else {"threads": threads}))
    # untimed warm-up so that compiled-code loading is not charged to the run
    build(random_keys(min(n, 1000), key_seed + 2), config)
    t0 = time.perf_counter()
    mphf = build(keys, config)
    build_time = time.perf_counter() - t0
    lookup_ns = float("nan")
    if n and lookups:
        probe = keys[rng.integers(0, n, size=lookups)]
        mphf.lookup_many(probe[:16])
        t0 = time.perf_counter()
        mphf.lookup_many(probe)
        lookup_ns = (time.perf_counter() - t0) * 1e9 / lookups
    return BenchRow(leaf_size, bucket_size, n, mphf.bits_per_key() if n else 0.0,
                    build_time * 1e9 / n if n else 0.0, lookup_ns)


def bench_csv(rows: Sequence[BenchRow], header: bool = True) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow([f.name for f in fields(BenchRow)])
    for row in rows:
        writer.writerow(
            [f"{v:.4f}" if isinstance(v, float) else v for v in astuple(row)])
    return out.getvalue()


def rice_table_deviation(leaf_size: int, limit: int = 2000) -> list[tuple[int, int, int]]:
    """Node sizes in the table range where the integer approximation is off by
    more than one: ``(m, exact, approx)``."""
    from .strategy import rice_param_approx, rice_param_from_log

    strategy = SplitStrategy(leaf_size)
    out = []
    for m in range(leaf_size + 1, limit + 1):
        parts = strategy.part_sizes(m)
        exact = rice_param_from_log(log_split_probability(parts))
        approx = rice_param_approx(m, parts)
        if abs(exact - approx) > 1:
            out.append((m, exact, approx))
    return out


__all__ = [
    "BenchRow",
    "GOLDEN_RATIO",
    "asymptotic_bijection_trials",
    "asymptotic_split_trials",
    "bench",
    "bench_csv",
    "brute_force_rice_param",
    "expected_bijection_trials",
    "expected_code_length",
    "expected_split_trials",
    "expected_tree_bits",
    "expected_tree_bits_per_key",
    "expected_unary_length",
    "random_keys",
    "rice_param",
    "rice_table_deviation",
    "shape_size",
    "strategy_tree",
    "summed_code_length",
    "tree_probability",
    "verify_invariance",
]
