"""Compiled inner loops: tree growth in rank space and leaf lookup.

Everything here works on plain integer/float arrays so it can run under
numba with the GIL released.  The Python wrappers in :mod:`ucorr.tree`
own the public surface.
"""
import numba as nb
import numpy as np

N_WAYS = 7
VERTICAL, HORIZONTAL, QUAD, T_LEFT, T_RIGHT, T_BOTTOM, T_TOP = range(N_WAYS)
PART_COUNTS = np.array([2, 2, 4, 3, 3, 3, 3], dtype=np.int64)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MUL1
    z = (z ^ (z >> np.uint64(27))) * _MUL2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def uniform_at(key, node, slot):
    """Counter-based uniform on [0, 1) addressed by (tree key, node, slot)."""
    z = _mix64(np.uint64(node) * _GOLDEN + np.uint64(slot) + np.uint64(1))
    z = _mix64(key ^ z)
    return float(z >> np.uint64(11)) * _INV_2_53


def slots_per_node(trials):
    # two point coordinates per trial, then one gamma per (trial, way)
    return trials * (2 + N_WAYS)


@nb.njit(cache=True, inline="always")
def weighted_impurity(n_obs, n_perm, inv_omega):
    """|D|_w * Gini(D); written with 1/omega so that omega = 1/n stays exact."""
    if n_obs == 0 or n_perm == 0:
        return 0.0
    a = float(n_obs)
    b = float(n_perm)
    return 2.0 * a * b / (inv_omega * a + b)


@nb.njit(cache=True)
def child_rects(way, x_lo, x_hi, y_lo, y_hi, a, b, out):
    """Write the part rectangles of a split into ``out`` (rows of x_lo, x_hi, y_lo, y_hi)."""
    if way == VERTICAL:
        out[0, 0], out[0, 1], out[0, 2], out[0, 3] = x_lo, a, y_lo, y_hi
        out[1, 0], out[1, 1], out[1, 2], out[1, 3] = a, x_hi, y_lo, y_hi
        return 2
    if way == HORIZONTAL:
        out[0, 0], out[0, 1], out[0, 2], out[0, 3] = x_lo, x_hi, y_lo, b
        out[1, 0], out[1, 1], out[1, 2], out[1, 3] = x_lo, x_hi, b, y_hi
        return 2
    if way == QUAD:
        out[0, 0], out[0, 1], out[0, 2], out[0, 3] = x_lo, a, y_lo, b
        out[1, 0], out[1, 1], out[1, 2], out[1, 3] = a, x_hi, y_lo, b
        out[2, 0], out[2, 1], out[2, 2], out[2, 3] = x_lo, a, b, y_hi
        out[3, 0], out[3, 1], out[3, 2], out[3, 3] = a, x_hi, b, y_hi
        return 4
    if way == T_LEFT:
        out[0, 0], out[0, 1], out[0, 2], out[0, 3] = x_lo, a, y_lo, b
        out[1, 0], out[1, 1], out[1, 2], out[1, 3] = x_lo, a, b, y_hi
        out[2, 0], out[2, 1], out[2, 2], out[2, 3] = a, x_hi, y_lo, y_hi
        return 3
    if way == T_RIGHT:
        out[0, 0], out[0, 1], out[0, 2], out[0, 3] = x_lo, a, y_lo, y_hi
        out[1, 0], out[1, 1], out[1, 2], out[1, 3] = a, x_hi, y_lo, b
        out[2, 0], out[2, 1], out[2, 2], out[2, 3] = a, x_hi, b, y_hi
        return 3
    if way == T_BOTTOM:
        out[0, 0], out[0, 1], out[0, 2], out[0, 3] = x_lo, a, y_lo, b
        out[1, 0], out[1, 1], out[1, 2], out[1, 3] = a, x_hi, y_lo, b
        out[2, 0], out[2, 1], out[2, 2], out[2, 3] = x_lo, x_hi, b, y_hi
        return 3
    # T_TOP
    out[0, 0], out[0, 1], out[0, 2], out[0, 3] = x_lo, x_hi, y_lo, b
    out[1, 0], out[1, 1], out[1, 2], out[1, 3] = x_lo, a, b, y_hi
    out[2, 0], out[2, 1], out[2, 2], out[2, 3] = a, x_hi, b, y_hi
    return 3


@nb.njit(cache=True)
def _shape_gini_gain(way, q_obs, q_perm, parent_term, inv_omega):
    # q_* indexed LB, RB, LT, RT
    lb = weighted_impurity(q_obs[0], q_perm[0], inv_omega)
    rb = weighted_impurity(q_obs[1], q_perm[1], inv_omega)
    lt = weighted_impurity(q_obs[2], q_perm[2], inv_omega)
    rt = weighted_impurity(q_obs[3], q_perm[3], inv_omega)
    left = weighted_impurity(q_obs[0] + q_obs[2], q_perm[0] + q_perm[2], inv_omega)
    right = weighted_impurity(q_obs[1] + q_obs[3], q_perm[1] + q_perm[3], inv_omega)
    bottom = weighted_impurity(q_obs[0] + q_obs[1], q_perm[0] + q_perm[1], inv_omega)
    top = weighted_impurity(q_obs[2] + q_obs[3], q_perm[2] + q_perm[3], inv_omega)
    if way == VERTICAL:
        return parent_term - (left + right)
    if way == HORIZONTAL:
        return (parent_term - (bottom + top))
    if way == QUAD:
        return 0.5 * (parent_term - (lb + rb + lt + rt))
    if way == T_LEFT:
        return (2.0 / 3.0) * (parent_term - (lb + lt + right))
    if way == T_RIGHT:
        return (2.0 / 3.0) * (parent_term - (left + rb + rt))
    if way == T_BOTTOM:
        return (2.0 / 3.0) * (parent_term - (lb + rb + top))
    return (2.0 / 3.0) * (parent_term - (bottom + lt + rt))


@nb.njit(cache=True)
def fill_candidates(rx, ry, idx, start, end, x_lo, x_hi, y_lo, y_hi, trials, min_width,
                    inv_omega, semi_random, key, node,
                    cand_a, cand_b, cand_gain, cand_valid):
    """Evaluate ``trials`` random split points and all seven ways for one leaf.

    Candidate ``t * 7 + way`` is written to the output buffers.  Returns the
    number of legal candidates.
    """
    width = x_hi - x_lo
    height = y_hi - y_lo
    x_ok = width >= 2 * min_width
    y_ok = height >= 2 * min_width
    n_cand = trials * N_WAYS
    for c in range(n_cand):
        cand_valid[c] = False
    if not x_ok and not y_ok:
        return 0

    n_obs = end - start
    parent_term = weighted_impurity(n_obs, width * height, inv_omega)
    size_w = np.sqrt(n_obs + width * height / inv_omega)
    gamma_base = 2 * trials
    q_obs = np.zeros(4, dtype=np.int64)
    q_perm = np.zeros(4, dtype=np.int64)
    n_legal = 0
    for t in range(trials):
        if x_ok:
            a = x_lo + min_width + int(uniform_at(key, node, 2 * t) * (width - 2 * min_width + 1))
        else:
            a = x_hi
        if y_ok:
            b = y_lo + min_width + int(uniform_at(key, node, 2 * t + 1) * (height - 2 * min_width + 1))
        else:
            b = y_hi
        q_obs[:] = 0
        for p in range(start, end):
            i = idx[p]
            k = 0
            if rx[i] > a:
                k += 1
            if ry[i] > b:
                k += 2
            q_obs[k] += 1
        wl = a - x_lo
        wr = x_hi - a
        hb = b - y_lo
        ht = y_hi - b
        q_perm[0] = wl * hb
        q_perm[1] = wr * hb
        q_perm[2] = wl * ht
        q_perm[3] = wr * ht
        for way in range(N_WAYS):
            if way == VERTICAL:
                legal = x_ok
            elif way == HORIZONTAL:
                legal = y_ok
            else:
                legal = x_ok and y_ok
            if not legal:
                continue
            c = t * N_WAYS + way
            cand_a[c] = a
            cand_b[c] = b
            cand_valid[c] = True
            n_legal += 1
            if semi_random:
                gamma = uniform_at(key, node, gamma_base + c)
                cand_gain[c] = (2.0 / PART_COUNTS[way]) * gamma * size_w
            else:
                cand_gain[c] = _shape_gini_gain(way, q_obs, q_perm, parent_term, inv_omega)
    return n_legal


@nb.njit(cache=True, nogil=True)
def grow_tree(rx, ry, max_leaves, trials, min_width, inv_omega, semi_random, key):
    """Greedy best-first growth of one second-order partitioning tree.

    Returns node arrays; children of node ``v`` occupy
    ``child_start[v] : child_start[v] + n_children[v]``.
    """
    n = rx.size
    max_nodes = 1 + 4 * max(max_leaves - 1, 0)
    x_lo = np.zeros(max_nodes, np.int64)
    x_hi = np.zeros(max_nodes, np.int64)
    y_lo = np.zeros(max_nodes, np.int64)
    y_hi = np.zeros(max_nodes, np.int64)
    child_start = np.zeros(max_nodes, np.int64)
    n_children = np.zeros(max_nodes, np.int64)
    split_way = np.full(max_nodes, -1, np.int64)
    split_a = np.zeros(max_nodes, np.int64)
    split_b = np.zeros(max_nodes, np.int64)
    seg_start = np.zeros(max_nodes, np.int64)
    seg_end = np.zeros(max_nodes, np.int64)
    best_gain = np.full(max_nodes, -np.inf)
    best_cand = np.full(max_nodes, -1, np.int64)
    best_a = np.zeros(max_nodes, np.int64)
    best_b = np.zeros(max_nodes, np.int64)

    n_cand = trials * N_WAYS
    cand_a = np.zeros(n_cand, np.int64)
    cand_b = np.zeros(n_cand, np.int64)
    cand_gain = np.zeros(n_cand)
    cand_valid = np.zeros(n_cand, np.bool_)

    idx = np.arange(n)
    scratch = np.empty(n, np.int64)
    part = np.empty(n, np.int64)
    rects = np.zeros((4, 4), np.int64)

    x_hi[0] = n
    y_hi[0] = n
    seg_end[0] = n
    n_nodes = 1
    n_leaves = 1
    to_eval_lo = 0
    to_eval_hi = 1

    while n_leaves < max_leaves:
        for v in range(to_eval_lo, to_eval_hi):
            legal = fill_candidates(rx, ry, idx, seg_start[v], seg_end[v], x_lo[v], x_hi[v],
                                    y_lo[v], y_hi[v], trials, min_width, inv_omega,
                                    semi_random, key, v, cand_a, cand_b, cand_gain, cand_valid)
            if legal == 0:
                continue
            for c in range(n_cand):
                if cand_valid[c] and (best_cand[v] < 0 or cand_gain[c] > best_gain[v]):
                    best_gain[v] = cand_gain[c]
                    best_cand[v] = c
                    best_a[v] = cand_a[c]
                    best_b[v] = cand_b[c]

        chosen = -1
        for v in range(n_nodes):
            if n_children[v] == 0 and best_cand[v] >= 0:
                if chosen < 0 or best_gain[v] > best_gain[chosen]:
                    chosen = v
        if chosen < 0:
            break

        v = chosen
        way = best_cand[v] % N_WAYS
        k = child_rects(way, x_lo[v], x_hi[v], y_lo[v], y_hi[v], best_a[v], best_b[v], rects)
        split_way[v] = way
        split_a[v] = best_a[v]
        split_b[v] = best_b[v]
        child_start[v] = n_nodes
        n_children[v] = k

        # stable counting sort of the leaf's rows by destination part
        s = seg_start[v]
        e = seg_end[v]
        counts = np.zeros(4, np.int64)
        for p in range(s, e):
            i = idx[p]
            for j in range(k):
                if rx[i] > rects[j, 0] and rx[i] <= rects[j, 1] and ry[i] > rects[j, 2] and ry[i] <= rects[j, 3]:
                    part[p] = j
                    counts[j] += 1
                    break
        offsets = np.zeros(4, np.int64)
        acc = s
        for j in range(k):
            offsets[j] = acc
            acc += counts[j]
        for p in range(s, e):
            j = part[p]
            scratch[offsets[j]] = idx[p]
            offsets[j] += 1
        idx[s:e] = scratch[s:e]

        acc = s
        for j in range(k):
            c = n_nodes + j
            x_lo[c] = rects[j, 0]
            x_hi[c] = rects[j, 1]
            y_lo[c] = rects[j, 2]
            y_hi[c] = rects[j, 3]
            seg_start[c] = acc
            acc += counts[j]
            seg_end[c] = acc
        to_eval_lo = n_nodes
        to_eval_hi = n_nodes + k
        n_nodes += k
        n_leaves += k - 1

    n_obs = seg_end[:n_nodes] - seg_start[:n_nodes]
    n_perm = (x_hi[:n_nodes] - x_lo[:n_nodes]) * (y_hi[:n_nodes] - y_lo[:n_nodes])
    label = np.empty(n_nodes)
    for v in range(n_nodes):
        a = n_obs[v] * inv_omega
        label[v] = a / (a + n_perm[v])
    return (x_lo[:n_nodes].copy(), x_hi[:n_nodes].copy(), y_lo[:n_nodes].copy(),
            y_hi[:n_nodes].copy(), child_start[:n_nodes].copy(), n_children[:n_nodes].copy(),
            split_way[:n_nodes].copy(), split_a[:n_nodes].copy(), split_b[:n_nodes].copy(),
            best_gain[:n_nodes].copy(), n_obs, n_perm, label)


@nb.njit(cache=True, nogil=True)
def predict_ranks(x_lo, x_hi, y_lo, y_hi, child_start, n_children, label, qx, qy):
    """Leaf label for each rank-space query point ``(qx[p], qy[p])``."""
    out = np.empty(qx.size)
    for p in range(qx.size):
        a = qx[p]
        b = qy[p]
        v = 0
        while n_children[v] > 0:
            c0 = child_start[v]
            nxt = -1
            for c in range(c0, c0 + n_children[v]):
                if a > x_lo[c] and a <= x_hi[c] and b > y_lo[c] and b <= y_hi[c]:
                    nxt = c
                    break
            if nxt < 0:
                break
            v = nxt
        out[p] = label[v]
    return out


@nb.njit(cache=True, nogil=True)
def rank_queries(sorted_values, values):
    """Count of training values >= v for every v, clamped into [1, n]."""
    n = sorted_values.size
    out = np.searchsorted(sorted_values, values)
    for p in range(out.size):
        r = n - out[p]
        out[p] = r if r > 0 else 1
    return out
