import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from divaug.policy import CandidateSet
from divaug.selection import (brute_force_max_variance, kmeanspp_select, random_select, select,
                              variance_diversity)

E1, E2 = [1.0, 0.0], [0.0, 1.0]

pools = st.integers(1, 9).flatmap(
    lambda e: st.integers(1, 6).flatmap(
        lambda d: arrays(np.float64, (e, d), elements=st.floats(0, 1))))


def second_moment(v):
    v = np.asarray(v, dtype=np.float64)
    return float(np.mean(np.sum(v * v, axis=1)) - np.sum(v.mean(axis=0) ** 2))


def exact_kmeanspp_distribution(v, S):
    """Exact probability of each ordered selection under D^2 seeding (rational arithmetic)."""
    v = [[Fraction(x) for x in row] for row in v]
    E = len(v)
    out = {}

    def d2(a, b):
        return sum((x - y) ** 2 for x, y in zip(v[a], v[b]))

    def rec(chosen, prob):
        if len(chosen) == S:
            out[tuple(chosen)] = prob
            return
        rest = [i for i in range(E) if i not in chosen]
        w = {i: min(d2(i, c) for c in chosen) for i in rest}
        total = sum(w.values())
        for i in rest:
            p = Fraction(1, len(rest)) if total == 0 else w[i] / total
            if p:
                rec(chosen + [i], prob * p)

    for first in range(E):
        rec([first], Fraction(1, E))
    return out


def test_examples():
    assert variance_diversity([E1, E2]) == 0.5
    assert variance_diversity([[0.2, 0.8]] * 5) == 0.0
    assert variance_diversity([[0.3, 0.7]]) == 0.0
    with pytest.raises(ValueError):
        variance_diversity(np.zeros((0, 3)))


@settings(max_examples=200, deadline=None)
@given(pools)
def test_matches_second_moment_identity(v):
    vd = variance_diversity(v)
    assert vd >= -1e-15
    assert vd == pytest.approx(second_moment(v), rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(pools, st.randoms(use_true_random=False))
def test_permutation_and_translation_invariance(v, r):
    perm = list(range(len(v)))
    r.shuffle(perm)
    base = variance_diversity(v)
    assert variance_diversity(v[perm]) == pytest.approx(base, rel=1e-12, abs=1e-15)
    assert variance_diversity(v + 0.37) == pytest.approx(base, rel=1e-9, abs=1e-12)


def test_kmeanspp_full_set():
    v = np.random.default_rng(0).dirichlet(np.ones(4), size=5)
    res = kmeanspp_select(v, 5, np.random.default_rng(1))
    assert sorted(res.chosen_indices) == [0, 1, 2, 3, 4]


def test_kmeanspp_never_repicks_duplicate():
    v = np.array([E1, E1, E2])
    for seed in range(200):
        chosen = kmeanspp_select(v, 2, np.random.default_rng(seed)).chosen_indices
        if chosen[0] in (0, 1):
            assert chosen[1] == 2


def test_kmeanspp_identical_vectors_fall_back_to_uniform():
    v = np.tile([0.25, 0.75], (4, 1))
    counts = {}
    for seed in range(4000):
        res = kmeanspp_select(v, 2, np.random.default_rng(seed))
        assert len(set(res.chosen_indices)) == 2
        assert res.diversity == 0.0
        counts[res.chosen_indices] = counts.get(res.chosen_indices, 0) + 1
    assert len(counts) == 12
    assert all(abs(c / 4000 - 1 / 12) < 0.02 for c in counts.values())


def test_kmeanspp_matches_exact_distribution():
    g = np.random.default_rng(8)
    v = g.dirichlet(np.ones(3), size=5).round(3)
    exact = exact_kmeanspp_distribution(v, 3)
    n = 20_000
    counts = {}
    for seed in range(n):
        c = kmeanspp_select(v, 3, np.random.default_rng(seed)).chosen_indices
        counts[c] = counts.get(c, 0) + 1
    assert set(counts) <= set(exact)
    for key, p in exact.items():
        p = float(p)
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(counts.get(key, 0) / n - p) <= 5 * sigma + 1e-9


@settings(max_examples=100, deadline=None)
@given(pools, st.integers(0, 2**32 - 1), st.data())
def test_kmeanspp_distinct_and_consistent(v, seed, data):
    S = data.draw(st.integers(1, len(v)))
    res = kmeanspp_select(v, S, np.random.default_rng(seed))
    assert len(res.chosen_indices) == S == len(set(res.chosen_indices))
    assert res.diversity == variance_diversity(v[list(res.chosen_indices)])
    assert res == kmeanspp_select(v, S, np.random.default_rng(seed))


def test_selection_bounds_rejected():
    v = np.eye(3)
    g = np.random.default_rng(0)
    for fn in (lambda s: kmeanspp_select(v, s, g), lambda s: random_select(v, s, g),
               lambda s: brute_force_max_variance(v, s)):
        with pytest.raises(ValueError):
            fn(4)
        with pytest.raises(ValueError):
            fn(0)


def test_brute_force_examples():
    res = brute_force_max_variance(np.array([E1, E1, E2]), 2)
    assert res.chosen_indices == (0, 2)
    assert res.diversity == 0.5
    v = np.random.default_rng(3).dirichlet(np.ones(4), size=6)
    assert brute_force_max_variance(v, 6).chosen_indices == tuple(range(6))
    with pytest.raises(ValueError):
        brute_force_max_variance(np.zeros((40, 2)), 20)


def test_brute_force_dominates_sampled_subsets():
    g = np.random.default_rng(4)
    v = g.dirichlet(np.ones(10), size=8)
    best = brute_force_max_variance(v, 4)
    by_loop = max(variance_diversity(v[list(c)]) for c in itertools.combinations(range(8), 4))
    assert best.diversity == pytest.approx(by_loop, rel=1e-12)
    for _ in range(1000):
        idx = g.choice(8, size=4, replace=False)
        assert variance_diversity(v[idx]) <= best.diversity + 1e-15


@pytest.mark.parametrize("E,S", [(8, 4), (4, 2)])
def test_select_on_candidate_sets(E, S, random_image):
    g = np.random.default_rng(E)
    cs = CandidateSet(0, [None] * E, [random_image(4, 4, 3) for _ in range(E)])
    with pytest.raises(ValueError):
        select(cs, S, g)
    cs.set_prob_vectors(g.dirichlet(np.ones(10), size=E))
    res = select(cs, S, np.random.default_rng(1))
    assert res == kmeanspp_select(cs.prob_vectors, S, np.random.default_rng(1))
    assert res.diversity <= brute_force_max_variance(cs.prob_vectors, S).diversity + 1e-15


def test_random_select_uniform():
    counts = np.zeros(5)
    for seed in range(5000):
        for i in random_select(np.eye(5), 2, np.random.default_rng(seed)).chosen_indices:
            counts[i] += 1
    assert np.all(np.abs(counts / counts.sum() - 0.2) < 0.015)
