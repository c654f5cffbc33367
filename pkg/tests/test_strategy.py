import itertools
from fractions import Fraction

import pytest

from recsplit.analysis import brute_force_rice_param
from recsplit.strategy import (
    MAX_RICE_PARAM,
    SplitStrategy,
    bijection_probability,
    ilog2_round,
    lambda_,
    log_split_probability,
    lower_aggregation,
    rice_param,
    rice_param_approx,
    rice_param_from_log,
    split_probability,
    upper_aggregation,
)


def enumerate_split_probability(parts):
    """Fraction of all maps [m] -> [m] whose preimage counts match ``parts``."""
    m = sum(parts)
    bounds = list(itertools.accumulate(parts))
    good = 0
    for f in itertools.product(range(m), repeat=m):
        counts = [0] * len(parts)
        for v in f:
            counts[next(i for i, b in enumerate(bounds) if v < b)] += 1
        good += counts == list(parts)
    return Fraction(good, m**m)


def test_aggregation_constants():
    assert (lower_aggregation(8), upper_aggregation(8)) == (4, 3)
    assert lower_aggregation(1) == 2
    assert upper_aggregation(6) == 2
    # exact ceilings at rational boundaries: 0.35*10 + 0.5 = 4 and 0.21*10 + 0.9 = 3
    assert lower_aggregation(10) == 4
    assert upper_aggregation(10) == 3
    assert (lower_aggregation(24), upper_aggregation(24)) == (9, 6)


@pytest.mark.parametrize("m,fanout,unit,parts", [
    (20, 3, 8, (8, 8, 4)),
    (50, 2, 32, (32, 18)),
    (1000, 2, 576, (576, 424)),
])
def test_node_spec_examples(m, fanout, unit, parts):
    spec = SplitStrategy(8).node_spec(m)
    assert (spec.fanout, spec.unit, spec.part_sizes) == (fanout, unit, parts)


def test_node_spec_rejects_leaves():
    with pytest.raises(ValueError):
        SplitStrategy(8).node_spec(8)


@pytest.mark.parametrize("leaf", [0, 25])
def test_leaf_size_bounds(leaf):
    with pytest.raises(ValueError):
        SplitStrategy(leaf)


def test_leaf_size_one_is_degenerate_but_valid():
    st = SplitStrategy(1)
    assert st.part_sizes(2) == (1, 1)
    assert st.part_sizes(3) == (2, 1)
    assert st.skip_info(1) == (0, 0)


@pytest.mark.parametrize("leaf", range(2, 25))
def test_part_shapes(leaf):
    st = SplitStrategy(leaf)
    for m in range(leaf + 1, 2001):
        spec = st.node_spec(m)
        parts = spec.part_sizes
        assert sum(parts) == m
        assert spec.fanout == len(parts) == -(-m // spec.unit)
        assert 1 <= parts[-1] <= spec.unit
        assert spec.unit % leaf == 0
        assert 0 <= spec.rice_param <= MAX_RICE_PARAM


@pytest.mark.parametrize("parts,expected", [
    ((4,), Fraction(1)),
    ((2, 2), Fraction(3, 8)),
    ((1, 1), Fraction(1, 2)),
])
def test_split_probability_examples(parts, expected):
    assert split_probability(parts) == expected


@pytest.mark.parametrize("parts", [(1, 1), (2, 2), (2, 1), (1, 1, 1), (3, 2), (2, 2, 1), (2, 2, 2)])
def test_split_probability_matches_enumeration(parts):
    assert split_probability(parts) == enumerate_split_probability(parts)


def test_bijection_probability_examples():
    assert bijection_probability(1) == 1
    assert bijection_probability(3) == Fraction(6, 27)
    assert bijection_probability(8) == Fraction(40320, 16777216)
    assert abs(float(1 / bijection_probability(8)) - 416.1) < 0.05


@pytest.mark.parametrize("m", range(1, 7))
def test_bijection_probability_matches_enumeration(m):
    good = sum(len(set(f)) == m for f in itertools.product(range(m), repeat=m))
    assert bijection_probability(m) == Fraction(good, m**m)


def test_rice_param_examples():
    assert rice_param(1) == 0
    assert rice_param(0.375) == 1
    p = float(bijection_probability(8))
    assert rice_param(p) == brute_force_rice_param(p)


def test_rice_param_rejects_bad_probabilities():
    for p in (0, -0.5, 1.5):
        with pytest.raises(ValueError):
            rice_param(p)


def test_ilog2_round_examples():
    assert ilog2_round(1) == 0
    assert ilog2_round(5) == 2
    assert ilog2_round(6) == 3
    with pytest.raises(ValueError):
        lambda_(0)


def test_rice_param_approx_examples():
    assert rice_param_approx(4, (2, 2)) == 1 == rice_param(split_probability((2, 2)))
    assert rice_param_approx(2, (1, 1)) == 0 == rice_param(split_probability((1, 1)))
    assert abs(rice_param_approx(64, (32, 32)) - rice_param(split_probability((32, 32)))) <= 1


@pytest.mark.parametrize("leaf", [4, 8, 12, 16, 24])
def test_rice_param_approx_on_large_binary_splits(leaf):
    # the approximation is only used for fanout-2 nodes beyond the table
    st = SplitStrategy(leaf)
    for m in list(range(st.upper_unit + 1, 2001, 3)) + [2500, 10**4, 10**5]:
        parts = st.part_sizes(m)
        exact = rice_param_from_log(log_split_probability(parts))
        assert abs(rice_param_approx(m, parts) - exact) <= 1


@pytest.mark.parametrize("leaf", [2, 5, 8, 12])
def test_table_matches_exact_rational_route(leaf):
    st = SplitStrategy(leaf)
    for m in range(2, 201):
        if m <= leaf:
            expected = rice_param(bijection_probability(m))
        else:
            expected = rice_param(split_probability(st.part_sizes(m)))
        assert st.rice(m) == expected


def test_skip_info_examples():
    st = SplitStrategy(8)
    assert st.skip_info(1) == (0, 0)
    assert st.skip_info(8) == (rice_param(bijection_probability(8)), 1)
    st2 = SplitStrategy(2)
    r_split = rice_param(split_probability((2, 1)))
    r_leaf = rice_param(bijection_probability(2))
    assert st2.skip_info(3) == (r_split + r_leaf, 2)


def test_skip_info_beyond_table_limit():
    st = SplitStrategy(8, table_limit=100)
    fixed, nodes = st.skip_info(5000)
    assert nodes > 5000 // 8
    assert st.tables(5000).fixed_bits[5000] == fixed


def test_tables_are_consistent_with_scalar_queries():
    st = SplitStrategy(5)
    t = st.tables(300)
    for m in range(6, 301):
        assert (t.fanout[m], t.unit[m]) == st.split_shape(m)
        assert (t.fixed_bits[m], t.nodes[m]) == st.skip_info(m)
        assert t.rice[m] == st.rice(m)
