"""Numba-compiled split scans, row partitioning and tree traversal.

Every function here has a twin in :mod:`salestack._kernels.vec` that performs
the same floating-point operations in the same order, so both backends pick
identical splits.

Layout: ``order[f]`` lists the active rows grouped by open node, each group
sorted by feature ``f``; node ``s`` occupies ``order[f, seg[s]:seg[s + 1]]``.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def gini_scan(XT, order, seg, w, wy, tot_w, tot_p, scan_mask, f_lo, f_hi,
              best_val, best_feat, best_thr):
    n_slots = seg.shape[0] - 1
    for f in range(f_lo, f_hi):
        for s in range(n_slots):
            if not scan_mask[s, f]:
                continue
            a = seg[s]
            b = seg[s + 1]
            n = tot_w[s]
            p = tot_p[s]
            bv = best_val[s]
            bt = 0.0
            improved = False
            cw = 0.0
            cp = 0.0
            last = XT[f, order[f, a]]
            for i in range(a, b):
                r = order[f, i]
                v = XT[f, r]
                if v > last:
                    nl = cw
                    nr = n - nl
                    al = cp
                    ar = p - al
                    dd = al * nr - ar * nl
                    gain = 2.0 * dd * dd / (nl * nr * n * n)
                    if gain > bv:
                        mid = 0.5 * (last + v)
                        if mid >= v:
                            mid = last
                        bv = gain
                        bt = mid
                        improved = True
                cw += w[r]
                cp += wy[r]
                last = v
            if improved:
                best_val[s] = bv
                best_feat[s] = f
                best_thr[s] = bt


@njit(cache=True, nogil=True)
def newton_scan(XT, order, seg, g, h, tot_g, tot_h, lam, min_hess, scan_mask,
                f_lo, f_hi, best_val, best_feat, best_thr):
    # best_val receives the children score gl^2/(hl+lam) + gr^2/(hr+lam);
    # the parent term and gamma are constant per node and applied by the caller
    n_slots = seg.shape[0] - 1
    for f in range(f_lo, f_hi):
        for s in range(n_slots):
            if not scan_mask[s, f]:
                continue
            a = seg[s]
            b = seg[s + 1]
            G = tot_g[s]
            H = tot_h[s]
            bv = best_val[s]
            bt = 0.0
            improved = False
            cg = 0.0
            ch = 0.0
            last = XT[f, order[f, a]]
            for i in range(a, b):
                r = order[f, i]
                v = XT[f, r]
                if v > last:
                    hr = H - ch
                    if ch >= min_hess and hr >= min_hess:
                        gr = G - cg
                        score = cg * cg / (ch + lam) + gr * gr / (hr + lam)
                        if score > bv:
                            mid = 0.5 * (last + v)
                            if mid >= v:
                                mid = last
                            bv = score
                            bt = mid
                            improved = True
                cg += g[r]
                ch += h[r]
                last = v
            if improved:
                best_val[s] = bv
                best_feat[s] = f
                best_thr[s] = bt


@njit(cache=True, nogil=True)
def partition_order(order, seg, new_slot, first_child, new_seg):
    """Split every parent segment into its two child segments, order-preserving.

    Rows of parent ``s`` go to child ``first_child[s]`` (left) or the one after
    it (right); parents with ``first_child[s] < 0`` became leaves and drop out.
    """
    d = order.shape[0]
    n_parent = seg.shape[0] - 1
    out = np.empty((d, new_seg[new_seg.shape[0] - 1]), dtype=order.dtype)
    widest = 0
    for s in range(n_parent):
        widest = max(widest, seg[s + 1] - seg[s])
    lbuf = np.empty(widest, dtype=order.dtype)
    rbuf = np.empty(widest, dtype=order.dtype)
    for f in range(d):
        for s in range(n_parent):
            c = first_child[s]
            if c < 0:
                continue
            # branchless: write to both buffers, advance only the matching one
            nl = 0
            nr = 0
            for i in range(seg[s], seg[s + 1]):
                r = order[f, i]
                go_left = np.int64(new_slot[r] == c)
                lbuf[nl] = r
                rbuf[nr] = r
                nl += go_left
                nr += 1 - go_left
            lp = new_seg[c]
            rp = new_seg[c + 1]
            for j in range(nl):
                out[f, lp + j] = lbuf[j]
            for j in range(nr):
                out[f, rp + j] = rbuf[j]
    return out


@njit(cache=True, nogil=True)
def apply_tree(X, feature, threshold, left, right):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while left[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
