"""Level-wise exact greedy tree growth shared by the forest and the booster.

Rows are kept in one presorted index array per feature. Each level scans every
feature once across all open nodes, then stably filters out rows that landed
in leaves, so the sort order never has to be recomputed.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass
class FlatTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    stat_a: np.ndarray
    stat_b: np.ndarray
    gain: np.ndarray
    depth: np.ndarray

    @property
    def n_nodes(self):
        return int(self.feature.size)

    @property
    def is_leaf(self):
        return self.left < 0


def _grow_to(a, cap, fill):
    out = np.full(cap, fill, dtype=a.dtype)
    out[:a.size] = a
    return out


def presort(XT):
    """Stable argsort of every feature row of ``XT`` (shape d x n)."""
    return np.argsort(XT, axis=1, kind="stable").astype(np.int64)


def _chunks(d, n_jobs):
    n_jobs = max(1, min(n_jobs, d))
    edges = np.linspace(0, d, n_jobs + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _scan(criterion, XT, order, seg, sa, sb, ta, tb, scan_mask, params, n_jobs):
    ns = seg.size - 1
    lam, min_hess = params

    def run(lo, hi):
        bv = np.zeros(ns) if criterion == "gini" else np.full(ns, -np.inf)
        bf = np.full(ns, -1, dtype=np.int64)
        bt = np.full(ns, np.nan)
        if criterion == "gini":
            _kernels.gini_scan(XT, order, seg, sa, sb, ta, tb, scan_mask, lo, hi, bv, bf, bt)
        else:
            _kernels.newton_scan(XT, order, seg, sa, sb, ta, tb, lam, min_hess, scan_mask,
                                 lo, hi, bv, bf, bt)
        return bv, bf, bt

    chunks = _chunks(XT.shape[0], n_jobs)
    if len(chunks) == 1:
        return run(*chunks[0])
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda c: run(*c), chunks))
    # chunk order = feature order, strict '>' keeps the lowest feature on ties
    bv, bf, bt = parts[0]
    for v, f, t in parts[1:]:
        better = v > bv
        bv = np.where(better, v, bv)
        bf = np.where(better, f, bf)
        bt = np.where(better, t, bt)
    return bv, bf, bt


def grow(XT, order_all, rows, sa, sb, *, criterion, max_depth=None,
         min_samples_split=2.0, lam=1.0, gamma=0.0, min_hess=0.0,
         feature_sampler=None, n_jobs=1):
    """Grow one tree over ``rows``.

    For ``criterion='gini'`` the per-row statistics are (weight, weight*label)
    and nodes stop when pure or lighter than ``min_samples_split``. For
    ``criterion='newton'`` they are (gradient, hessian) and only ``max_depth``,
    ``min_hess`` and the gain sign stop growth. A split is accepted only with
    gain > 0.
    """
    d, n = XT.shape
    act = np.sort(np.asarray(rows, dtype=np.int64))
    slot = np.full(n, -1, dtype=np.int64)
    slot[act] = 0
    seg = np.array([0, act.size], dtype=np.int64)
    if act.size == n:
        order = order_all
    else:
        order = _kernels.vec.partition_order(order_all, None, slot, None, seg)
    params = (float(lam), float(min_hess))
    depth_cap = np.inf if max_depth is None else max_depth

    cap = 64
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.full(cap, np.nan)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    stat_a = np.zeros(cap)
    stat_b = np.zeros(cap)
    gain = np.zeros(cap)
    depth_of = np.zeros(cap, dtype=np.int64)
    n_nodes = 1
    node_of_slot = np.array([0], dtype=np.int64)
    depth = 0
    while node_of_slot.size:
        ns = node_of_slot.size
        s_act = slot[act]
        ta = np.bincount(s_act, weights=sa[act], minlength=ns)
        tb = np.bincount(s_act, weights=sb[act], minlength=ns)
        stat_a[node_of_slot] = ta
        stat_b[node_of_slot] = tb
        if depth >= depth_cap:
            break
        if criterion == "gini":
            splittable = (ta >= min_samples_split) & (tb > 0) & (tb < ta)
        else:
            splittable = np.ones(ns, dtype=bool)
        if not splittable.any():
            break
        if feature_sampler is not None:
            scan_mask = feature_sampler(ns)
        else:
            scan_mask = np.ones((ns, d), dtype=bool)
        scan_mask &= splittable[:, None]
        bv, bf, bt = _scan(criterion, XT, order, seg, sa, sb, ta, tb, scan_mask, params, n_jobs)
        if criterion == "gini":
            bg = bv
        else:
            found = bf >= 0
            bg = np.zeros(ns)
            bg[found] = 0.5 * (bv[found] - ta[found] * ta[found] / (tb[found] + lam)) - gamma
            bf[bg <= 0.0] = -1
        split = bf >= 0
        if not split.any():
            break
        rank = np.cumsum(split) - 1
        ks = np.flatnonzero(split)
        parents = node_of_slot[ks]
        n_new = 2 * ks.size
        if n_nodes + n_new > cap:
            cap = max(2 * cap, n_nodes + n_new)
            feature, threshold, left, right, stat_a, stat_b, gain, depth_of = (
                _grow_to(a, cap, fill) for a, fill in (
                    (feature, -1), (threshold, np.nan), (left, -1), (right, -1),
                    (stat_a, 0.0), (stat_b, 0.0), (gain, 0.0), (depth_of, 0)))
        children = np.arange(n_nodes, n_nodes + n_new, dtype=np.int64)
        feature[parents] = bf[ks]
        threshold[parents] = bt[ks]
        gain[parents] = bg[ks]
        left[parents] = children[0::2]
        right[parents] = children[1::2]
        depth_of[children] = depth + 1
        n_nodes += n_new

        moving = split[s_act]
        new_slot = np.full(act.size, -1, dtype=np.int64)
        mv = act[moving]
        sm = s_act[moving]
        go_right = XT[bf[sm], mv] > bt[sm]
        new_slot[moving] = 2 * rank[sm] + go_right
        slot[act] = new_slot
        kept = new_slot >= 0
        counts = np.bincount(new_slot[kept], minlength=n_new)
        new_seg = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        if depth + 1 < depth_cap:
            # the deepest level only needs node totals, never a scan
            first_child = np.where(split, 2 * rank, -1)
            order = _kernels.partition_order(order, seg, slot, first_child, new_seg)
        seg = new_seg
        act = act[kept]
        node_of_slot = children
        depth += 1

    k = n_nodes
    return FlatTree(feature[:k].copy(), threshold[:k].copy(), left[:k].copy(),
                    right[:k].copy(), stat_a[:k].copy(), stat_b[:k].copy(),
                    gain[:k].copy(), depth_of[:k].copy())
