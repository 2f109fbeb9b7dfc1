import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from oracles import all_strings, p_mut_naive, p_sel_proportionate, p_sel_scaled_direct, p_sel_truncation
from propea.bitcore import InvariantError, bitstring, hamming, make_rng
from propea.operators import (MutationParams, SelectionMode, bitwise_mutate, mutate_population,
                              mutation_probability, sample_selection, selection_probabilities,
                              zero_total_fitness)

PROP = SelectionMode.proportionate()


def test_proportionate_fixture():
    assert selection_probabilities([3, 1], PROP).tolist() == [0.75, 0.25]


@pytest.mark.parametrize("k", [1, 7, 1000])
def test_equal_fitness_is_uniform(k):
    p = selection_probabilities([k] * 6, PROP)
    assert np.allclose(p, 1 / 6, rtol=0, atol=1e-15)


def test_scaled_no_overflow():
    p = selection_probabilities([1000.0, 999.0], SelectionMode.scaled(math.e))
    assert p == pytest.approx([math.e / (1 + math.e), 1 / (1 + math.e)], rel=1e-12)
    assert np.all(np.isfinite(p))


def test_scaled_matches_exact_rationals():
    # c = 2 and integer fitness: c**f is an exact integer
    fs = [0, 3, 5, 5, 1]
    exact = p_sel_proportionate([2 ** f for f in fs])
    p = selection_probabilities(np.array(fs) * math.log(2), SelectionMode.scaled(2))
    assert np.allclose(p, [float(q) for q in exact], rtol=1e-12, atol=0)


def test_truncation_and_uniform():
    fs = [2, 5, 5, 1, 3]
    p = selection_probabilities(fs, SelectionMode.truncation(2))
    assert p.tolist() == [float(q) for q in p_sel_truncation(fs, 2)]
    assert p.tolist() == [0, 0.5, 0.5, 0, 0]
    assert selection_probabilities(fs, SelectionMode.uniform()).tolist() == [0.2] * 5
    with pytest.raises(ValueError):
        selection_probabilities(fs, SelectionMode.truncation(6))


def test_zero_total_falls_back_to_uniform():
    assert zero_total_fitness([0, 0, 0], PROP)
    assert selection_probabilities([0, 0, 0], PROP).tolist() == [1 / 3] * 3
    assert not zero_total_fitness([0, 1, 0], PROP)


def test_mode_validation():
    with pytest.raises(ValueError):
        SelectionMode.scaled(1.0)
    with pytest.raises(ValueError):
        SelectionMode.truncation(0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=1, max_size=40))
def test_proportionate_matches_fractions(fs):
    p = selection_probabilities(fs, PROP)
    assert abs(p.sum() - 1) < 1e-12
    assert np.allclose(p, [float(q) for q in p_sel_proportionate(fs)], rtol=1e-14, atol=1e-16)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 60), min_size=2, max_size=30), st.floats(1.05, 20))
def test_f_monotone(fs, c):
    for mode, vals in ((PROP, fs), (SelectionMode.scaled(c), np.array(fs) * math.log(c))):
        if mode is PROP and sum(fs) == 0:
            continue
        p = selection_probabilities(vals, mode)
        for i in range(len(fs)):
            for j in range(len(fs)):
                assert (p[i] >= p[j]) == (fs[i] >= fs[j])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=1, max_size=20), st.floats(1.05, 5))
def test_scaled_log_domain_vs_direct(fs, c):
    p = selection_probabilities(np.array(fs) * math.log(c), SelectionMode.scaled(c))
    direct = p_sel_scaled_direct(fs, c)
    assert np.allclose(p, direct, rtol=1e-10, atol=0)


def test_sample_point_mass():
    rng = make_rng(3)
    assert np.all(sample_selection(np.array([1.0, 0, 0]), rng, 1000) == 0)


def test_sample_two_point():
    idx = sample_selection(np.array([0.75, 0.25]), make_rng(4), 10 ** 6)
    assert abs(np.mean(idx == 0) - 0.75) <= 0.0013


def test_sample_uniform_chi2():
    idx = sample_selection(np.full(5, 0.2), make_rng(5), 10 ** 6)
    assert stats.chisquare(np.bincount(idx, minlength=5)).pvalue > 1e-6


def test_sample_never_picks_zero_mass():
    p = np.array([0.0, 0.3, 0.0, 0.7, 0.0])
    idx = sample_selection(p, make_rng(6), 10 ** 5)
    assert set(np.unique(idx)) == {1, 3}


def test_mutation_params_validation():
    with pytest.raises(ValueError):
        MutationParams(0, 5)
    with pytest.raises(ValueError):
        MutationParams(6, 5)


def test_full_rate_complements():
    x = bitstring("0110100")
    y = bitwise_mutate(x, MutationParams(7, 7), make_rng(0))
    assert np.array_equal(y, 1 - x)


def test_tiny_rate_keeps_input():
    x = bitstring("0110100")
    y = bitwise_mutate(x, MutationParams(1e-12, 7), make_rng(0))
    assert np.array_equal(y, x)
    assert y is not x


def test_mutation_length_check():
    with pytest.raises(InvariantError):
        bitwise_mutate(bitstring("01"), MutationParams(1, 3), make_rng(0))


def test_mutation_distance_law():
    n, rate, N = 10, 0.1, 10 ** 6
    pop = np.zeros((N, n), dtype=np.uint8)
    mutate_population(pop, rate, make_rng(8))
    d = pop.sum(axis=1)
    assert abs(d.mean() - 1.0) <= 0.003
    counts = np.bincount(d, minlength=n + 1)
    expected = stats.binom.pmf(np.arange(n + 1), n, rate) * N
    # pool the sparse tail so every expected count is at least 5
    keep = expected >= 5
    obs = np.append(counts[keep], counts[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    assert stats.chisquare(obs, exp).pvalue > 1e-6


def test_mutation_bits_are_independent_of_position():
    pop = np.zeros((200000, 8), dtype=np.uint8)
    mutate_population(pop, 0.3, make_rng(9))
    assert np.all(np.abs(pop.mean(axis=0) - 0.3) < 4 * math.sqrt(0.21 / 200000))


def test_mutation_probability_examples():
    x = bitstring("0" * 10)
    assert mutation_probability(x, x, MutationParams(1, 10)) == pytest.approx(0.3486784401, rel=1e-12)
    n = 9
    assert mutation_probability(bitstring("0" * n), bitstring("1" * n), MutationParams(n / 2, n)) == pytest.approx(
        2.0 ** -n, rel=1e-12)


@pytest.mark.parametrize("n,chi", [(4, 0.5), (8, 1), (12, 2)])
def test_mutation_probability_sums_to_one(n, chi):
    params = MutationParams(chi, n)
    x = bitstring("10" * (n // 2))
    total = sum(mutation_probability(x, np.array(y, dtype=np.uint8), params) for y in all_strings(n))
    assert abs(total - 1) < 1e-10


def test_mutation_probability_matches_naive_and_symmetry():
    params = MutationParams(1.5, 6)
    rng = make_rng(10)
    for _ in range(200):
        x, y = rng.integers(0, 2, (2, 6), dtype=np.uint8)
        p = mutation_probability(x, y, params)
        assert p == pytest.approx(p_mut_naive(x.tolist(), y.tolist(), params.rate), rel=1e-12)
        assert p == mutation_probability(1 - y, 1 - x, params)
        assert hamming(x, y) == hamming(1 - y, 1 - x)
