"""Second-order partitioning trees that separate observed rows from their permutations.

Every node is a rank rectangle.  A split picks an integer point inside the
rectangle and cuts it one of seven ways (two univariate cuts, the four
quadrants, or one of four T-shapes).  Observed rows are counted directly;
permuted rows are counted with :func:`ucorr.rank_space.permuted_count`.
"""
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._validation import ValidationError, check_positive_int
from .rank_space import RawSample, Rect, build_rank_map, permuted_count, rank_training_sample


class Way(enum.IntEnum):
    VERTICAL = _kernels.VERTICAL
    HORIZONTAL = _kernels.HORIZONTAL
    QUAD = _kernels.QUAD
    T_LEFT = _kernels.T_LEFT
    T_RIGHT = _kernels.T_RIGHT
    T_BOTTOM = _kernels.T_BOTTOM
    T_TOP = _kernels.T_TOP

    @property
    def n_parts(self):
        return int(_kernels.PART_COUNTS[self])


class Criterion(enum.Enum):
    GINI_GAIN = "gini"
    SEMI_RANDOM = "semi_random"


@dataclass(frozen=True)
class SplitCandidate:
    a: int
    b: int
    way: Way
    gain: float = 0.0

    @property
    def point(self):
        return (self.a, self.b)

    def parts(self, rect):
        """Part rectangles of ``rect`` produced by this candidate."""
        out = np.zeros((4, 4), dtype=np.int64)
        k = _kernels.child_rects(int(self.way), rect.x_lo, rect.x_hi, rect.y_lo, rect.y_hi,
                                 self.a, self.b, out)
        return [Rect(*map(int, row)) for row in out[:k]]


@dataclass(frozen=True)
class TreeConfig:
    """Growth limits for one tree.

    ``omega`` is the weight of a permuted row; ``None`` means ``1/n`` of the
    training sample, which is the only setting used by the forest.
    """

    max_leaf_count: int
    split_trial_count: int = 10
    min_leaf_width: int = 1
    omega: float | None = None
    criterion: Criterion = Criterion.GINI_GAIN

    def __post_init__(self):
        check_positive_int(self.max_leaf_count, "max_leaf_count", minimum=2)
        check_positive_int(self.split_trial_count, "split_trial_count")
        check_positive_int(self.min_leaf_width, "min_leaf_width")
        if self.omega is not None and not self.omega > 0:
            raise ValidationError(f"omega must be positive, got {self.omega}")

    def inv_omega(self, n):
        return float(n) if self.omega is None else 1.0 / self.omega


def _as_key(key):
    return np.uint64(int(key) & 0xFFFFFFFFFFFFFFFF)


def gini_impurity(n_obs, n_perm, omega):
    """Weighted two-class Gini impurity of a set with ``n_obs`` observed and ``n_perm`` permuted rows."""
    w = n_obs + omega * n_perm
    if w == 0:
        return 0.0
    return 2.0 * (n_obs / w) * (omega * n_perm / w)


def _weighted_term(n_obs, n_perm, inv_omega):
    return _kernels.weighted_impurity(int(n_obs), int(n_perm), float(inv_omega))


def leaf_label(n_obs, n_perm, omega):
    """Weighted share of observed rows, ``n_obs / (n_obs + omega * n_perm)``."""
    return n_obs / (n_obs + omega * n_perm)


def delta_gini(rect, cand, ranked, omega=None):
    """Penalized impurity reduction of splitting ``rect`` by ``cand``.

    Observed counts come from point-in-rectangle tests on ``ranked`` and
    permuted counts from the closed form, so no permuted row is built.
    """
    inv_omega = float(ranked.n) if omega is None else 1.0 / omega
    before = _weighted_term(ranked.count_observed(rect), permuted_count(rect), inv_omega)
    after = sum(_weighted_term(ranked.count_observed(p), permuted_count(p), inv_omega)
                for p in cand.parts(rect))
    return (2.0 / cand.way.n_parts) * (before - after)


def delta_rand(cand, node_weighted_size, gamma):
    """Semi-random score ``(2/|parts|) * gamma * sqrt(|D|_w)`` used by randomized trees."""
    return (2.0 / cand.way.n_parts) * gamma * math.sqrt(node_weighted_size)


def enumerate_candidates(ranked, rect, trial_count, min_leaf_width, key, node=0, omega=None,
                         criterion=Criterion.GINI_GAIN):
    """All legal split candidates for the leaf ``rect``, in candidate-index order.

    The split points are the same ones :func:`train_tree` would draw for node
    number ``node`` of a tree grown with ``key``.
    """
    rx = np.ascontiguousarray(ranked.rx, dtype=np.int64)
    ry = np.ascontiguousarray(ranked.ry, dtype=np.int64)
    idx = np.flatnonzero(rect.contains(rx, ry)).astype(np.int64)
    n_cand = trial_count * _kernels.N_WAYS
    cand_a = np.zeros(n_cand, np.int64)
    cand_b = np.zeros(n_cand, np.int64)
    cand_gain = np.zeros(n_cand)
    cand_valid = np.zeros(n_cand, np.bool_)
    inv_omega = float(ranked.n) if omega is None else 1.0 / omega
    _kernels.fill_candidates(rx, ry, idx, 0, idx.size, rect.x_lo, rect.x_hi, rect.y_lo, rect.y_hi,
                             trial_count, min_leaf_width, inv_omega,
                             criterion is Criterion.SEMI_RANDOM, _as_key(key), node,
                             cand_a, cand_b, cand_gain, cand_valid)
    return [SplitCandidate(int(cand_a[c]), int(cand_b[c]), Way(c % _kernels.N_WAYS), float(cand_gain[c]))
            for c in np.flatnonzero(cand_valid)]


@dataclass(frozen=True)
class TreeNode:
    rect: Rect
    label: float
    n_obs: int
    children: tuple = ()

    @property
    def is_leaf(self):
        return not self.children


@dataclass(eq=False)
class DecisionTree:
    """A trained tree stored as flat node arrays.

    Node 0 is the root ``(0, n] x (0, n]``; the children of node ``v`` are the
    contiguous block starting at ``child_start[v]``.
    """

    n: int
    x_lo: np.ndarray
    x_hi: np.ndarray
    y_lo: np.ndarray
    y_hi: np.ndarray
    child_start: np.ndarray
    n_children: np.ndarray
    split_way: np.ndarray
    split_a: np.ndarray
    split_b: np.ndarray
    gain: np.ndarray
    n_obs: np.ndarray
    n_perm: np.ndarray
    label: np.ndarray
    rank_maps: tuple = field(default=None)

    @property
    def n_nodes(self):
        return self.label.size

    @property
    def leaf_ids(self):
        return np.flatnonzero(self.n_children == 0)

    @property
    def n_leaves(self):
        return self.leaf_ids.size

    def rect(self, v):
        return Rect(int(self.x_lo[v]), int(self.x_hi[v]), int(self.y_lo[v]), int(self.y_hi[v]))

    def node(self, v=0):
        """Nested :class:`TreeNode` view of the subtree rooted at ``v``."""
        c0 = self.child_start[v]
        kids = tuple(self.node(c) for c in range(c0, c0 + self.n_children[v]))
        return TreeNode(self.rect(v), float(self.label[v]), int(self.n_obs[v]), kids)

    def leaves(self):
        return [self.node(v) for v in self.leaf_ids]

    def score_ranks(self, qx, qy):
        """Leaf labels for rank-space points; ranks must lie in ``[1, n]``."""
        qx = np.ascontiguousarray(qx, dtype=np.int64)
        qy = np.ascontiguousarray(qy, dtype=np.int64)
        return _kernels.predict_ranks(self.x_lo, self.x_hi, self.y_lo, self.y_hi,
                                      self.child_start, self.n_children, self.label, qx, qy)

    def score(self, x, y):
        """Leaf labels for raw points, mapped through the tree's training rank maps."""
        if self.rank_maps is None:
            raise ValidationError("tree was trained on ranks only; pass rank maps to score raw values")
        x_map, y_map = self.rank_maps
        return self.score_ranks(x_map.clamped_rank_of(np.atleast_1d(x)),
                                y_map.clamped_rank_of(np.atleast_1d(y)))


def train_tree(ranked, config, key, rank_maps=None):
    """Grow one tree on ``ranked`` with best-first greedy splitting.

    ``key`` seeds the counter-based stream that places split points (and the
    random scores of semi-random trees), so equal keys give identical trees.
    """
    rx = np.ascontiguousarray(ranked.rx, dtype=np.int64)
    ry = np.ascontiguousarray(ranked.ry, dtype=np.int64)
    arrays = _kernels.grow_tree(rx, ry, config.max_leaf_count, config.split_trial_count,
                                config.min_leaf_width, config.inv_omega(ranked.n),
                                config.criterion is Criterion.SEMI_RANDOM, _as_key(key))
    return DecisionTree(ranked.n, *arrays, rank_maps=rank_maps)


def fit_tree(x, y, config, key):
    """Rank a raw sample, grow a tree on it and keep the rank maps for scoring."""
    sample = RawSample(x, y)
    ranked = rank_training_sample(sample)
    maps = (build_rank_map(sample.x), build_rank_map(sample.y))
    return train_tree(ranked, config, key, rank_maps=maps)


def score_point(tree, rank_maps, x, y):
    """Label of the leaf containing the raw point ``(x, y)``."""
    x_map, y_map = rank_maps
    qx = x_map.clamped_rank_of(np.atleast_1d(x))
    qy = y_map.clamped_rank_of(np.atleast_1d(y))
    return float(tree.score_ranks(qx, qy)[0])
