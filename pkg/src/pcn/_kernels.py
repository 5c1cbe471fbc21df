"""Compiled single-site update sweep.

The model tree is flattened into arrays before the sweep: node ``0`` is
the root, each node row carries a leaf flag, a distribution flag and the
cdf/pmf of its law, and child lookup goes through either a dense
``(node, code)`` table or an int64-keyed hash map, where ``code`` packs
one frame payload (sum of per-symbol weights in COUNT mode, base-``|A|``
digits in POSITION mode).

The padded array holds the live state with a mirror margin of ``m``
cells; every accepted write refreshes the mirror images of the updated
site so neighborhood reads near the border stay consistent.
"""

from __future__ import annotations

import numpy as np
from numba import njit, types
from numba.typed import Dict


def empty_child_map():
    return Dict.empty(types.int64, types.int64)


def build_child_map(keys: np.ndarray, values: np.ndarray):
    d = empty_child_map()
    for i in range(keys.shape[0]):
        d[int(keys[i])] = int(values[i])
    return d


@njit(cache=True, nogil=True)
def run_sweep(
    padded,
    rows,
    cols,
    m,
    depth,
    a,
    substitute,
    metropolis,
    freeze_masked,
    order,
    u1,
    u2,
    offs_dr,
    offs_dc,
    order_start,
    count_mode,
    powb,
    use_dense,
    dense,
    child_map,
    stride,
    has_dist,
    is_leaf,
    cdf,
    pmf,
):
    rows_img = np.empty(3, np.int64)
    cols_img = np.empty(3, np.int64)
    for t in range(order.shape[0]):
        site = order[t]
        r = site // cols
        c = site % cols
        pr = r + m
        pc = c + m
        cur = padded[pr, pc]
        if cur < 0 and freeze_masked:
            continue
        node = 0
        best = 0 if has_dist[0] == 1 else -1
        if is_leaf[0] == 0:
            for j in range(1, depth + 1):
                code = 0
                if count_mode:
                    for k in range(order_start[j - 1], order_start[j]):
                        v = padded[pr + offs_dr[k], pc + offs_dc[k]]
                        if v < 0:
                            v = substitute
                        code += powb[v]
                else:
                    for k in range(order_start[j - 1], order_start[j]):
                        v = padded[pr + offs_dr[k], pc + offs_dc[k]]
                        if v < 0:
                            v = substitute
                        code = code * a + v
                if use_dense:
                    nxt = dense[node, code]
                    if nxt < 0:
                        break
                    node = nxt
                else:
                    ck = node * stride + code
                    if ck in child_map:
                        node = child_map[ck]
                    else:
                        break
                if has_dist[node] == 1:
                    best = node
                if is_leaf[node] == 1:
                    break
        if best < 0:
            continue
        if metropolis:
            prop = int(u1[t] * a)
            if prop >= a:
                prop = a - 1
            if cur >= 0:
                qc = pmf[best, cur]
                if qc > 0.0 and u2[t] >= pmf[best, prop] / qc:
                    continue
            val = prop
        else:
            u = u1[t]
            val = 0
            while val < a - 1 and u >= cdf[best, val]:
                val += 1
        if val == cur:
            continue
        padded[pr, pc] = val
        nr = 0
        if 1 <= r <= m:
            rows_img[nr] = m - r
            nr += 1
        if rows - 1 - m <= r <= rows - 2:
            rows_img[nr] = m + 2 * rows - 2 - r
            nr += 1
        nc = 0
        if 1 <= c <= m:
            cols_img[nc] = m - c
            nc += 1
        if cols - 1 - m <= c <= cols - 2:
            cols_img[nc] = m + 2 * cols - 2 - c
            nc += 1
        for i in range(nr):
            padded[rows_img[i], pc] = val
        for jj in range(nc):
            padded[pr, cols_img[jj]] = val
        for i in range(nr):
            for jj in range(nc):
                padded[rows_img[i], cols_img[jj]] = val
