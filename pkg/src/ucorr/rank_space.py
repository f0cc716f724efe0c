"""Rank-order coordinates and analytic counting of the virtual permuted sample.

A bivariate sample is mapped onto the integer grid ``{1..n}^2``.  Because the
x-ranks and y-ranks of the training rows are both permutations of ``1..n``,
the number of cross pairs ``(rx_i, ry_j)`` inside any rank rectangle is a
product of side lengths and never needs to be enumerated.
"""
from dataclasses import dataclass

import numpy as np

from ._validation import ValidationError, check_finite_1d, check_pair


@dataclass(frozen=True)
class RawSample:
    """Paired observations ``(x_i, y_i)``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x, y = check_pair(self.x, self.y, min_size=1)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.x.size

    def __len__(self):
        return self.x.size


@dataclass(frozen=True)
class RankMap:
    """Maps a value to the number of training values greater than or equal to it."""

    sorted_values: np.ndarray

    @property
    def n(self):
        return self.sorted_values.size

    def rank_of(self, v):
        """Rank of ``v`` in ``[0, n]``; scalar in, int out, array in, array out."""
        v = np.asarray(v, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValidationError("cannot rank NaN or infinite values")
        r = self.n - np.searchsorted(self.sorted_values, v, side="left")
        if r.ndim == 0:
            return int(r)
        return r.astype(np.int64)

    def clamped_rank_of(self, v):
        """Like :meth:`rank_of` but values above every training value land on rank 1."""
        return np.maximum(self.rank_of(v), 1)


def build_rank_map(values):
    values = check_finite_1d(values)
    return RankMap(np.sort(values))


def tie_broken_ranks(values):
    """Descending ranks ``1..n``; equal values are ordered by position."""
    values = np.asarray(values)
    order = np.argsort(-values, kind="stable")
    ranks = np.empty(values.size, dtype=np.int64)
    ranks[order] = np.arange(1, values.size + 1)
    return ranks


@dataclass(frozen=True)
class RankedSample:
    """Training rows in rank coordinates; both axes are permutations of ``1..n``."""

    rx: np.ndarray
    ry: np.ndarray

    @property
    def n(self):
        return self.rx.size

    def count_observed(self, rect):
        inside = (self.rx > rect.x_lo) & (self.rx <= rect.x_hi) & (self.ry > rect.y_lo) & (self.ry <= rect.y_hi)
        return int(np.count_nonzero(inside))


def rank_training_sample(sample):
    """Rank both axes of ``sample`` so that each forms an exact permutation of ``1..n``."""
    if sample.n < 2:
        raise ValidationError(f"ranking needs at least 2 rows, got {sample.n}")
    return RankedSample(tie_broken_ranks(sample.x), tie_broken_ranks(sample.y))


@dataclass(frozen=True)
class Rect:
    """Half-open rank rectangle ``(x_lo, x_hi] x (y_lo, y_hi]``."""

    x_lo: int
    x_hi: int
    y_lo: int
    y_hi: int

    def __post_init__(self):
        if not (0 <= self.x_lo < self.x_hi and 0 <= self.y_lo < self.y_hi):
            raise ValidationError(f"degenerate rectangle {self}")

    @classmethod
    def root(cls, n):
        return cls(0, n, 0, n)

    @property
    def width(self):
        return self.x_hi - self.x_lo

    @property
    def height(self):
        return self.y_hi - self.y_lo

    def contains(self, rx, ry):
        return (rx > self.x_lo) & (rx <= self.x_hi) & (ry > self.y_lo) & (ry <= self.y_hi)


def permuted_count(rect):
    """Number of virtual permuted rows ``(rx_i, ry_j)`` inside ``rect``."""
    return (rect.x_hi - rect.x_lo) * (rect.y_hi - rect.y_lo)
