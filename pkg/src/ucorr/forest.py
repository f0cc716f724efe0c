"""Bagged second-order trees, out-of-bag scoring and the uCorr coefficient."""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from ._validation import ValidationError, check_fraction, check_positive_int, check_sample_size
from .rank_space import RankedSample, RawSample, tie_broken_ranks
from .tree import Criterion, TreeConfig, train_tree

DEFAULT_M = 2000
MAX_LEAVES = 64

# spawn keys that keep the subset stream apart from the per-tree streams
_SUBSET_STREAM = 0
_TREE_STREAM = 1


def default_leaf_count(n):
    r = math.isqrt(n)
    return min(r + (r * r < n), MAX_LEAVES)


def default_min_leaf_width(n):
    # ceil(0.03 * n) without float rounding
    return max(1, (3 * n + 99) // 100)


def default_m(n):
    return min(DEFAULT_M, n * (n - 1))


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters; ``None`` fields are resolved from ``n`` by :meth:`resolve`."""

    tree_count: int = 100
    random_split_fraction: float = 0.5
    m: int | None = None
    max_leaf_count: int | None = None
    min_leaf_width: int | None = None
    split_trials: int = 10
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        check_positive_int(self.tree_count, "tree_count")
        check_fraction(self.random_split_fraction, "random_split_fraction")
        check_positive_int(self.split_trials, "split_trials")
        check_positive_int(self.threads, "threads")
        if self.m is not None:
            check_positive_int(self.m, "m")
        if self.max_leaf_count is not None:
            check_positive_int(self.max_leaf_count, "max_leaf_count", minimum=2)
        if self.min_leaf_width is not None:
            check_positive_int(self.min_leaf_width, "min_leaf_width")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def resolve(self, n):
        """Copy with every data-dependent default filled in for sample size ``n``."""
        m = default_m(n) if self.m is None else self.m
        if m > n * (n - 1):
            raise ValidationError(f"m={m} exceeds the {n * (n - 1)} off-diagonal pairs available for n={n}")
        return ForestConfig(
            tree_count=self.tree_count,
            random_split_fraction=self.random_split_fraction,
            m=m,
            max_leaf_count=default_leaf_count(n) if self.max_leaf_count is None else self.max_leaf_count,
            min_leaf_width=default_min_leaf_width(n) if self.min_leaf_width is None else self.min_leaf_width,
            split_trials=self.split_trials,
            seed=int(self.seed),
            threads=self.threads,
        )

    @property
    def n_random_trees(self):
        return int(math.floor(self.random_split_fraction * self.tree_count))

    def tree_config(self, z):
        criterion = Criterion.SEMI_RANDOM if z < self.n_random_trees else Criterion.GINI_GAIN
        return TreeConfig(self.max_leaf_count, self.split_trials, self.min_leaf_width, criterion=criterion)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PermutedSubset:
    """Off-diagonal index pairs: pair ``k`` is the permuted row ``(x[i[k]], y[j[k]])``."""

    i: np.ndarray
    j: np.ndarray

    def __len__(self):
        return self.i.size


def bootstrap_indices(n, rng):
    """Draw ``n`` row indices with replacement; also return the in-bag mask."""
    idx = rng.integers(0, n, size=n)
    in_bag = np.zeros(n, dtype=bool)
    in_bag[idx] = True
    return idx, in_bag


def sample_permuted_subset(n, m, rng):
    """Uniform sample of ``m`` distinct pairs ``(i, j)`` with ``i != j``."""
    total = n * (n - 1)
    if m > total:
        raise ValidationError(f"cannot draw m={m} distinct off-diagonal pairs from n={n} ({total} available)")
    flat = rng.choice(total, size=m, replace=False)
    i = flat // (n - 1)
    r = flat % (n - 1)
    j = r + (r >= i)
    return PermutedSubset(i.astype(np.int64), j.astype(np.int64))


def _stream(seed, *key):
    return np.random.SeedSequence(int(seed), spawn_key=key)


@dataclass
class ScoreTable:
    """Running out-of-bag score sums for the observed rows and the permuted pairs."""

    obs_sum: np.ndarray
    obs_count: np.ndarray
    perm_sum: np.ndarray
    perm_count: np.ndarray
    subset: PermutedSubset

    @classmethod
    def empty(cls, n, subset):
        m = len(subset)
        return cls(np.zeros(n), np.zeros(n, np.int64), np.zeros(m), np.zeros(m, np.int64), subset)

    @property
    def n(self):
        return self.obs_sum.size

    @property
    def m(self):
        return self.perm_sum.size

    @staticmethod
    def _mean(total, count):
        out = np.full(total.size, np.nan)
        np.divide(total, count, out=out, where=count > 0)
        return out

    @property
    def obs_scores(self):
        """Aggregated score per observed row, NaN where no tree left it out of bag."""
        return self._mean(self.obs_sum, self.obs_count)

    @property
    def perm_scores(self):
        return self._mean(self.perm_sum, self.perm_count)

    def add(self, obs_labels, obs_mask, perm_labels, perm_mask):
        self.obs_sum += np.where(obs_mask, obs_labels, 0.0)
        self.obs_count += obs_mask
        self.perm_sum += np.where(perm_mask, perm_labels, 0.0)
        self.perm_count += perm_mask


def _tree_pass(x, y, subset, config, z):
    """Train tree ``z`` on its bootstrap draw and score every example it left out."""
    n = x.size
    rng = np.random.default_rng(_stream(config.seed, _TREE_STREAM, z, 0))
    key = _stream(config.seed, _TREE_STREAM, z, 1).generate_state(1, dtype=np.uint64)[0]
    boot, in_bag = bootstrap_indices(n, rng)
    xb = x[boot]
    yb = y[boot]
    ranked = RankedSample(tie_broken_ranks(xb), tie_broken_ranks(yb))
    tree = train_tree(ranked, config.tree_config(z), key)

    qx = _kernels.rank_queries(np.sort(xb), x)
    qy = _kernels.rank_queries(np.sort(yb), y)
    obs_labels = tree.score_ranks(qx, qy)
    perm_labels = tree.score_ranks(qx[subset.i], qy[subset.j])
    oob = ~in_bag
    # a pair is scored when either of its source rows was left out
    perm_mask = oob[subset.i] | oob[subset.j]
    return obs_labels, oob, perm_labels, perm_mask


def aggregate_scores(sample, subset, config):
    """Train the forest and accumulate out-of-bag scores.

    Trees may be trained on several threads, but their contributions are
    added in tree order so the result does not depend on ``config.threads``.
    """
    config = config.resolve(sample.n)
    table = ScoreTable.empty(sample.n, subset)
    x, y = sample.x, sample.y

    def run(z):
        return _tree_pass(x, y, subset, config, z)

    if config.threads == 1:
        for z in range(config.tree_count):
            table.add(*run(z))
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            for result in pool.map(run, range(config.tree_count)):
                table.add(*result)
    return table


def concordance_sum(obs, perm):
    """Sum of sign(o - p) over all pairs, computed by sorting; exact integer."""
    perm = np.sort(perm)
    below = np.searchsorted(perm, obs, side="left")
    above = perm.size - np.searchsorted(perm, obs, side="right")
    return int(below.sum() - above.sum())


def compute_rho(table, n=None, m=None):
    """uCorr from a score table; unscored examples count as ties."""
    n = table.n if n is None else n
    m = table.m if m is None else m
    obs = table.obs_scores
    perm = table.perm_scores
    obs = obs[~np.isnan(obs)]
    perm = perm[~np.isnan(perm)]
    return concordance_sum(obs, perm) / (n * m)


def ucorr(sample, config=ForestConfig()):
    """Compute the uCorr coefficient of ``sample``.

    Returns
    -------
    rho : float
        Dependence coefficient in ``[-1, 1]``; near 0 under independence.
    table : ScoreTable
        Out-of-bag scores used to form ``rho``.
    """
    if not isinstance(sample, RawSample):
        sample = RawSample(*sample)
    check_sample_size(sample.n)
    config = config.resolve(sample.n)
    if config.m <= 8:
        raise ValidationError(f"m must exceed 8 (assumption A2), got m={config.m}")
    rng = np.random.default_rng(_stream(config.seed, _SUBSET_STREAM))
    subset = sample_permuted_subset(sample.n, config.m, rng)
    table = aggregate_scores(sample, subset, config)
    return compute_rho(table), table
