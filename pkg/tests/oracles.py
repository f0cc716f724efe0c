"""Brute-force reference computations that never use the analytic counting path."""
import numpy as np

from ucorr.rank_space import Rect
from ucorr.tree import Way


def oracle_parts(rect, a, b, way):
    left, right = (rect.x_lo, a), (a, rect.x_hi)
    bottom, top = (rect.y_lo, b), (b, rect.y_hi)
    full_x, full_y = (rect.x_lo, rect.x_hi), (rect.y_lo, rect.y_hi)
    layout = {
        Way.VERTICAL: [(left, full_y), (right, full_y)],
        Way.HORIZONTAL: [(full_x, bottom), (full_x, top)],
        Way.QUAD: [(left, bottom), (right, bottom), (left, top), (right, top)],
        Way.T_LEFT: [(left, bottom), (left, top), (right, full_y)],
        Way.T_RIGHT: [(left, full_y), (right, bottom), (right, top)],
        Way.T_BOTTOM: [(left, bottom), (right, bottom), (full_x, top)],
        Way.T_TOP: [(full_x, bottom), (left, top), (right, top)],
    }[Way(way)]
    return [Rect(xs[0], xs[1], ys[0], ys[1]) for xs, ys in layout]


def materialized_counts(ranked, rect):
    """Observed and permuted counts by explicit enumeration of the n x n grid."""
    rx, ry = np.asarray(ranked.rx), np.asarray(ranked.ry)
    gx = np.repeat(rx, rx.size)
    gy = np.tile(ry, ry.size)
    n_perm = int(np.count_nonzero((gx > rect.x_lo) & (gx <= rect.x_hi) & (gy > rect.y_lo) & (gy <= rect.y_hi)))
    n_obs = int(np.count_nonzero((rx > rect.x_lo) & (rx <= rect.x_hi) & (ry > rect.y_lo) & (ry <= rect.y_hi)))
    return n_obs, n_perm


def weighted_gini_term(n_obs, n_perm, omega):
    w = n_obs + omega * n_perm
    if w == 0:
        return 0.0
    return w * 2.0 * (n_obs / w) * (omega * n_perm / w)


def grid_delta_gini(ranked, rect, a, b, way):
    omega = 1.0 / ranked.n
    parts = oracle_parts(rect, a, b, way)
    before = weighted_gini_term(*materialized_counts(ranked, rect), omega)
    after = sum(weighted_gini_term(*materialized_counts(ranked, p), omega) for p in parts)
    return 2.0 / len(parts) * (before - after)
