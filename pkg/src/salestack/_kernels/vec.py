"""Pure-numpy versions of the split scans, partitioning and traversal.

Used when numba is unavailable or disabled. Arithmetic mirrors
:mod:`salestack._kernels.jit` operation for operation; running sums restart
from zero at every node so float results match bitwise.
"""
import numpy as np


def _segment_cumsum(values, seg_id, starts, lengths):
    """Inclusive running sums restarting at every segment start."""
    pos = np.arange(values.size) - np.repeat(starts, lengths)
    pad = np.zeros((starts.size, lengths.max()))
    pad[seg_id, pos] = values
    return np.cumsum(pad, axis=1)[seg_id, pos]


def _first_max_per_slot(s, val, pos):
    # slot, then value descending, then scan position
    o = np.lexsort((pos, -val, s))
    s_o = s[o]
    return o[np.r_[True, s_o[1:] != s_o[:-1]]]


def _midpoints(a, b):
    mid = 0.5 * (a + b)
    return np.where(mid >= b, a, mid)


def _segments(seg, scan_mask_f):
    """Row positions, slot ids and per-slot extents of the scanned segments."""
    slots = np.flatnonzero(scan_mask_f & (np.diff(seg) > 0))
    if slots.size == 0:
        return None
    starts_abs = seg[slots]
    lengths = seg[slots + 1] - starts_abs
    starts_rel = np.cumsum(lengths) - lengths
    seg_id = np.repeat(np.arange(slots.size), lengths)
    positions = starts_abs[seg_id] + (np.arange(lengths.sum()) - starts_rel[seg_id])
    return positions, slots[seg_id], seg_id, starts_rel, lengths


def _scan(XT, order, seg, stat1, stat2, scan_mask, f_lo, f_hi, best_val, best_feat,
          best_thr, score_fn):
    for f in range(f_lo, f_hi):
        parts = _segments(seg, scan_mask[:, f])
        if parts is None:
            continue
        positions, s, seg_id, starts, lengths = parts
        idx = order[f, positions]
        v = XT[f, idx]
        c1 = _segment_cumsum(stat1[idx], seg_id, starts, lengths)
        c2 = _segment_cumsum(stat2[idx], seg_id, starts, lengths)
        # candidate between i and i+1 uses sums through row i
        cand = np.flatnonzero((s[:-1] == s[1:]) & (v[:-1] < v[1:]))
        if cand.size == 0:
            continue
        sc = s[cand]
        val, ok = score_fn(sc, c1[cand], c2[cand])
        cand, sc, val = cand[ok], sc[ok], val[ok]
        if cand.size == 0:
            continue
        pick = _first_max_per_slot(sc, val, cand)
        ps = sc[pick]
        better = val[pick] > best_val[ps]
        ps = ps[better]
        pc = cand[pick][better]
        best_val[ps] = val[pick][better]
        best_feat[ps] = f
        best_thr[ps] = _midpoints(v[pc], v[pc + 1])


def gini_scan(XT, order, seg, w, wy, tot_w, tot_p, scan_mask, f_lo, f_hi,
              best_val, best_feat, best_thr):
    def score(sc, nl, al):
        n = tot_w[sc]
        nr = n - nl
        ar = tot_p[sc] - al
        dd = al * nr - ar * nl
        return 2.0 * dd * dd / (nl * nr * n * n), np.ones(sc.size, dtype=bool)

    _scan(XT, order, seg, w, wy, scan_mask, f_lo, f_hi, best_val, best_feat, best_thr, score)


def newton_scan(XT, order, seg, g, h, tot_g, tot_h, lam, min_hess, scan_mask,
                f_lo, f_hi, best_val, best_feat, best_thr):
    def score(sc, gl, hl):
        hr = tot_h[sc] - hl
        ok = (hl >= min_hess) & (hr >= min_hess)
        gr = tot_g[sc] - gl
        with np.errstate(divide="ignore", invalid="ignore"):
            val = gl * gl / (hl + lam) + gr * gr / (hr + lam)
        return val, ok

    _scan(XT, order, seg, g, h, scan_mask, f_lo, f_hi, best_val, best_feat, best_thr, score)


def partition_order(order, seg, new_slot, first_child, new_seg):
    d = order.shape[0]
    ns = new_slot[order]
    keep = ns >= 0
    kept = order[keep].reshape(d, -1)
    key = ns[keep].reshape(d, -1)
    o = np.argsort(key, axis=1, kind="stable")
    return np.take_along_axis(kept, o, axis=1)


def apply_tree(X, feature, threshold, left, right):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = np.flatnonzero(left[node] >= 0)
    while active.size:
        cur = node[active]
        go_left = X[active, feature[cur]] <= threshold[cur]
        node[active] = np.where(go_left, left[cur], right[cur])
        active = active[left[node[active]] >= 0]
    return node
