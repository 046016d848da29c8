import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from byzcsl.aggregation import (
    Mean,
    Median,
    Quantile,
    TrimmedMean,
    as_batch,
    coordinate_mean,
    coordinate_median,
    coordinate_quantile,
    parse_rule,
    trim_count,
    trimmed_mean,
)


def sort_oracle_trimmed(G, b):
    out = []
    for col in np.asarray(G, dtype=float).T:
        kept = sorted(col.tolist())[b:len(col) - b]
        out.append(sum(kept) / len(kept))
    return np.array(out)


def sort_oracle_order(G, k):
    return np.array([sorted(col.tolist())[k - 1] for col in np.asarray(G, dtype=float).T])


def test_trimmed_mean_examples():
    assert trimmed_mean([1.0, 2.0, 3.0], 0.0)[0] == 2.0
    assert trimmed_mean([0.0, 1.0, 2.0, 3.0, 100.0], 0.2)[0] == 2.0


def test_median_examples():
    assert coordinate_median([1.0, 2.0, 3.0])[0] == 2.0
    assert coordinate_median([1.0, 2.0, 3.0, 4.0])[0] == 2.0


def test_mean_examples():
    assert coordinate_mean([[5.0, -1.0]]).tolist() == [5.0, -1.0]
    assert coordinate_mean([1.0, 3.0])[0] == 2.0


def test_quantile_examples():
    assert coordinate_quantile([10.0, 20.0, 30.0, 40.0], 0.5)[0] == 20.0
    assert coordinate_quantile([10.0, 20.0, 30.0, 40.0], 0.75)[0] == 30.0


def test_trim_count_is_robust_to_float_error():
    assert trim_count(30, 0.1) == 3
    assert trim_count(7, 1 / 7) == 1
    assert trim_count(50, 0.25) == 12


def test_sorting_oracles_on_random_batches(rng):
    for _ in range(1000):
        m = int(rng.integers(1, 16))
        d = int(rng.integers(1, 6))
        G = rng.standard_normal((m, d))
        if rng.random() < 0.5:
            G = np.round(G, 1)  # force ties
        beta = rng.uniform(0, 0.5)
        b = trim_count(m, beta)
        if m - 2 * b < 1:
            continue
        np.testing.assert_array_equal(trimmed_mean(G, beta), sort_oracle_trimmed(G, b))
        np.testing.assert_array_equal(coordinate_median(G), sort_oracle_order(G, math.ceil(m / 2)))
        level = rng.uniform(0.01, 0.99)
        np.testing.assert_array_equal(coordinate_quantile(G, level),
                                      sort_oracle_order(G, max(1, math.ceil(level * m - 1e-9))))
        np.testing.assert_array_equal(coordinate_mean(G), trimmed_mean(G, 0.0))


def test_seven_by_four_oracle(rng):
    G = rng.standard_normal((7, 4))
    np.testing.assert_array_equal(trimmed_mean(G, 1 / 7), sort_oracle_trimmed(G, 1))


def test_nan_is_trimmed_from_the_top():
    G = np.array([[1.0], [np.nan], [2.0], [3.0], [4.0]])
    assert trimmed_mean(G, 0.2)[0] == 3.0
    assert coordinate_median(G)[0] == 3.0


def test_rule_objects_and_parser():
    G = np.arange(12.0).reshape(4, 3)
    assert np.array_equal(parse_rule("trimean", beta=0.25)(G), TrimmedMean(0.25)(G))
    assert np.array_equal(parse_rule("median")(G), Median()(G))
    assert np.array_equal(parse_rule("mean")(G), Mean()(G))
    assert np.array_equal(parse_rule("quantile", level=0.75)(G), Quantile(0.75)(G))
    with pytest.raises(ValueError):
        parse_rule("krum")
    with pytest.raises(ValueError):
        parse_rule("trimean")


@pytest.mark.parametrize("beta", [-0.1, 0.5, 0.7])
def test_invalid_beta(beta):
    with pytest.raises(ValueError):
        TrimmedMean(beta)
    with pytest.raises(ValueError):
        trimmed_mean([1.0, 2.0, 3.0], beta)


def test_batch_validation():
    with pytest.raises(ValueError):
        as_batch([])
    with pytest.raises(ValueError):
        as_batch([np.zeros(2), np.zeros(3)])
    with pytest.raises(ValueError):
        Quantile(1.0)


finite = st.floats(-1e6, 1e6, allow_nan=False)


@st.composite
def batches(draw):
    m = draw(st.integers(1, 25))
    d = draw(st.integers(1, 5))
    return draw(arrays(np.float64, (m, d), elements=finite))


@settings(max_examples=200, deadline=None)
@given(batches(), st.floats(0.0, 0.49), st.randoms(use_true_random=False))
def test_aggregators_are_permutation_invariant(G, beta, rnd):
    m = G.shape[0]
    if m - 2 * trim_count(m, beta) < 1:
        return
    perm = list(range(m))
    rnd.shuffle(perm)
    P = G[perm]
    np.testing.assert_allclose(trimmed_mean(P, beta), trimmed_mean(G, beta), rtol=1e-12, atol=1e-6)
    np.testing.assert_array_equal(coordinate_median(P), coordinate_median(G))


@settings(max_examples=200, deadline=None)
@given(batches(), st.floats(0.0, 0.49))
def test_aggregators_within_column_range(G, beta):
    m = G.shape[0]
    if m - 2 * trim_count(m, beta) < 1:
        return
    lo, hi = G.min(axis=0), G.max(axis=0)
    for agg in (trimmed_mean(G, beta), coordinate_median(G), coordinate_mean(G)):
        assert np.all(agg >= lo - 1e-9 * (1 + np.abs(lo))) and np.all(agg <= hi + 1e-9 * (1 + np.abs(hi)))


@settings(max_examples=200, deadline=None)
@given(batches(), st.floats(-100, 100), st.floats(0.125, 8.0))
def test_median_is_affine_equivariant(G, shift, scale):
    # powers of two keep the scaling exact
    scale = 2.0 ** round(math.log2(scale))
    np.testing.assert_allclose(coordinate_median(G * scale + shift), coordinate_median(G) * scale + shift,
                               rtol=1e-12, atol=1e-9)


def test_trimmed_mean_resists_planted_outliers(rng):
    m, q = 20, 4
    honest = rng.standard_normal((m - q, 3))
    G = np.vstack([honest, np.full((q, 3), 1e9)])
    out = trimmed_mean(G, 0.2)
    assert np.all(np.abs(out) <= np.abs(honest).max())


def lemma_bound(values, honest_idx, mu, alpha, beta, m):
    h = values[honest_idx] - mu
    return (abs(h.sum()) / ((1 - 2 * beta) * m)
            + (2 * beta + alpha) / (1 - 2 * beta) * np.abs(h).max())


def test_lemma_two_trimmed_mean_bound(rng):
    """Deterministic trimmed-mean bound for beta > alpha, fuzzed over planted corruptions."""
    violations = 0
    checked = 0
    while checked < 10_000:
        m = int(rng.integers(3, 60))
        q = int(rng.integers(0, (m - 1) // 2))  # corrupted count
        b = int(rng.integers(q + 1, (m + 1) // 2)) if q + 1 < (m + 1) // 2 else None
        if b is None or m - 2 * b < 1:
            continue
        alpha, beta = q / m, b / m
        honest = rng.standard_normal(m - q) * rng.choice([1e-3, 1.0, 1e3])
        kind = rng.integers(4)
        if kind == 0:
            bad = rng.choice([-1.0, 1.0], q) * 1e9
        elif kind == 1:
            bad = np.full(q, 1e9 * rng.choice([-1.0, 1.0]))
        elif kind == 2:
            bad = rng.uniform(-1e9, 1e9, q)
        else:  # hide inside the honest range
            bad = rng.uniform(honest.min(), honest.max(), q) if q else np.zeros(0)
        values = np.empty(m)
        slots = rng.permutation(m)
        honest_idx, bad_idx = slots[:m - q], slots[m - q:]
        values[honest_idx] = honest
        values[bad_idx] = bad
        mu = honest.mean() if rng.random() < 0.5 else rng.normal(0, 10)
        lhs = abs(trimmed_mean(values[:, None], beta)[0] - mu)
        rhs = lemma_bound(values, honest_idx, mu, alpha, beta, m)
        violations += lhs > rhs
        checked += 1
    assert violations == 0
