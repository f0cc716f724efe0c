import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ucorr._validation import ValidationError
from ucorr.forest import (ForestConfig, PermutedSubset, ScoreTable, aggregate_scores, bootstrap_indices,
                          compute_rho, default_leaf_count, default_m, default_min_leaf_width,
                          sample_permuted_subset, ucorr)
from ucorr.rank_space import RawSample


def brute_rho(obs, perm, n, m):
    total = 0
    for o in obs:
        for p in perm:
            if np.isnan(o) or np.isnan(p):
                continue
            total += (o > p) - (o < p)
    return total / (n * m)


def table_from_scores(obs, perm):
    obs = np.asarray(obs, dtype=float)
    perm = np.asarray(perm, dtype=float)
    subset = PermutedSubset(np.zeros(perm.size, np.int64), np.ones(perm.size, np.int64))
    return ScoreTable(np.nan_to_num(obs), (~np.isnan(obs)).astype(np.int64),
                      np.nan_to_num(perm), (~np.isnan(perm)).astype(np.int64), subset)


def test_defaults():
    assert default_leaf_count(200) == 15
    assert default_leaf_count(225) == 15
    assert default_leaf_count(226) == 16
    assert default_leaf_count(16000) == 64
    assert default_min_leaf_width(200) == 6
    assert default_min_leaf_width(300) == 9
    assert default_min_leaf_width(301) == 10
    assert default_m(10) == 90
    assert default_m(1000) == 2000
    cfg = ForestConfig().resolve(400)
    assert (cfg.m, cfg.max_leaf_count, cfg.min_leaf_width, cfg.split_trials, cfg.tree_count) == (2000, 20, 12, 10, 100)


def test_random_tree_split():
    cfg = ForestConfig(tree_count=100).resolve(50)
    assert cfg.n_random_trees == 50
    assert ForestConfig(tree_count=7, random_split_fraction=1 / 3).n_random_trees == 2


def test_config_validation():
    with pytest.raises(ValidationError):
        ForestConfig(tree_count=0)
    with pytest.raises(ValidationError):
        ForestConfig(random_split_fraction=1.5)
    with pytest.raises(ValidationError):
        ForestConfig(m=100).resolve(10)


# --- bootstrap ------------------------------------------------------------------

def test_bootstrap_distinct_fraction():
    rng = np.random.default_rng(0)
    fractions = [bootstrap_indices(1000, rng)[1].mean() for _ in range(1000)]
    assert abs(np.mean(fractions) - (1 - np.exp(-1))) <= 0.03


def test_bootstrap_n2_is_uniform_over_four_outcomes():
    rng = np.random.default_rng(1)
    draws = [tuple(bootstrap_indices(2, rng)[0]) for _ in range(8000)]
    values, counts = np.unique(draws, axis=0, return_counts=True)
    assert len(values) == 4
    assert np.all(np.abs(counts / 8000 - 0.25) < 0.02)


def test_bootstrap_is_seeded():
    a = bootstrap_indices(50, np.random.default_rng(7))
    b = bootstrap_indices(50, np.random.default_rng(7))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], np.isin(np.arange(50), a[0]))


# --- permuted subset ---------------------------------------------------------------

def test_subset_exhaustive_case():
    s = sample_permuted_subset(3, 6, np.random.default_rng(0))
    assert sorted(zip(s.i, s.j)) == [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]


@given(st.integers(2, 60), st.integers(0, 2**32 - 1))
def test_subset_pairs_distinct_and_off_diagonal(n, seed):
    m = min(200, n * (n - 1))
    s = sample_permuted_subset(n, m, np.random.default_rng(seed))
    assert len(s) == m
    assert np.all(s.i != s.j)
    assert np.all((s.i >= 0) & (s.i < n) & (s.j >= 0) & (s.j < n))
    assert len(set(zip(s.i, s.j))) == m


def test_subset_large():
    s = sample_permuted_subset(100, 2000, np.random.default_rng(3))
    assert len(set(zip(s.i, s.j))) == 2000


def test_subset_too_large():
    with pytest.raises(ValidationError):
        sample_permuted_subset(3, 7, np.random.default_rng(0))


# --- rho ---------------------------------------------------------------------------

def test_rho_extremes_and_q():
    assert compute_rho(table_from_scores([0.9, 0.8], [0.1, 0.2, 0.3])) == 1.0
    assert compute_rho(table_from_scores([0.1, 0.2], [0.5, 0.6, 0.7])) == -1.0
    assert compute_rho(table_from_scores([0.4] * 3, [0.4] * 5)) == 0.0
    assert compute_rho(table_from_scores([0.7], [0.3])) == 1.0
    assert compute_rho(table_from_scores([0.3], [0.3])) == 0.0
    assert compute_rho(table_from_scores([0.1], [0.3])) == -1.0


def test_unscored_examples_count_as_ties():
    t = table_from_scores([0.9, np.nan], [0.1, 0.2])
    assert compute_rho(t) == pytest.approx(2 / 4)


@given(st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0, np.nan]), min_size=1, max_size=30),
       st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0, np.nan]), min_size=1, max_size=30))
def test_rho_matches_pairwise_count(obs, perm):
    t = table_from_scores(obs, perm)
    rho = compute_rho(t)
    assert rho == pytest.approx(brute_rho(obs, perm, len(obs), len(perm)), abs=1e-15)
    assert -1.0 <= rho <= 1.0
    # swapping the groups flips the sign
    assert compute_rho(table_from_scores(perm, obs)) == -rho


# --- end to end --------------------------------------------------------------------

def test_ucorr_rejects_small_samples():
    with pytest.raises(ValidationError, match="A2"):
        ucorr(RawSample(np.arange(9.0), np.arange(9.0)))


def test_oob_eligibility():
    rng = np.random.default_rng(0)
    sample = RawSample(rng.uniform(size=40), rng.uniform(size=40))
    cfg = ForestConfig(tree_count=1).resolve(40)
    subset = sample_permuted_subset(40, 200, rng)
    table = aggregate_scores(sample, subset, cfg)
    # with one tree the in-bag rows are never scored
    assert 0 < table.obs_count.sum() < 40
    scored = table.obs_count > 0
    assert np.all(np.isnan(table.obs_scores[~scored]))
    assert np.all((table.perm_count == 0) | (table.perm_count == 1))

    full = aggregate_scores(sample, subset, ForestConfig(tree_count=100).resolve(40))
    assert np.all(full.obs_count > 0)
    assert np.all(full.perm_count >= np.maximum(full.obs_count[subset.i], full.obs_count[subset.j]))
    assert np.all((full.obs_scores >= 0) & (full.obs_scores <= 1))


def test_pair_scored_when_either_row_out_of_bag():
    # every tree: obs row k is scored iff out of bag; pair (i, j) iff i or j is
    rng = np.random.default_rng(5)
    sample = RawSample(rng.uniform(size=30), rng.uniform(size=30))
    subset = sample_permuted_subset(30, 300, rng)
    cfg = ForestConfig(tree_count=1, seed=11).resolve(30)
    table = aggregate_scores(sample, subset, cfg)
    oob = table.obs_count.astype(bool)
    np.testing.assert_array_equal(table.perm_count.astype(bool), oob[subset.i] | oob[subset.j])


def test_null_scores_are_not_separated():
    diffs = []
    for rep in range(100):
        rng = np.random.default_rng(1000 + rep)
        sample = RawSample(rng.uniform(size=100), rng.uniform(size=100))
        _, table = ucorr(sample, ForestConfig(seed=rep, tree_count=50))
        diffs.append(np.nanmean(table.obs_scores) - np.nanmean(table.perm_scores))
    diffs = np.array(diffs)
    se = diffs.std(ddof=1) / np.sqrt(diffs.size)
    assert abs(diffs.mean()) < 3 * se


def test_circle_is_detected():
    rng = np.random.default_rng(42)
    theta = rng.uniform(0, 2 * np.pi, 300)
    rho, _ = ucorr(RawSample(np.cos(theta), np.sin(theta)))
    assert 0.6 <= rho <= 1.0


def test_monotone_invariance_and_determinism():
    rng = np.random.default_rng(8)
    x = rng.normal(size=150)
    y = x ** 2 + 0.3 * rng.normal(size=150)
    cfg = ForestConfig(seed=99, tree_count=40)
    rho, table = ucorr(RawSample(x, y), cfg)
    rho2, table2 = ucorr(RawSample(np.exp(x), 5 * y - 3), cfg)
    assert rho == rho2
    np.testing.assert_array_equal(table.obs_sum, table2.obs_sum)
    rho3, table3 = ucorr(RawSample(x, y), ForestConfig(seed=99, tree_count=40, threads=4))
    assert rho3 == rho
    np.testing.assert_array_equal(table3.perm_sum, table.perm_sum)
    rho4, _ = ucorr(RawSample(x, y), ForestConfig(seed=100, tree_count=40))
    assert rho4 != rho
