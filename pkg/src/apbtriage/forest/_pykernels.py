"""Pure numpy fallback for the native kernels in ``_kernels.pyx``.

Both backends must return bit-identical results. Keep the floating-point
expressions here in the same order as the Cython versions.
"""
from __future__ import annotations

import numpy as np

TIE_EPS = 1e-12


def _gini(a, b):
    w = a + b
    p0 = a / w
    p1 = b / w
    return 1.0 - p0 * p0 - p1 * p1


def best_split(X, rows, mult, y, feats, nvals, w0, w1, min_leaf):
    k = len(feats)
    nv = nvals[feats].astype(np.int64)
    offs = np.zeros(k, dtype=np.int64)
    np.cumsum(nv[:-1], out=offs[1:])
    total = int(nv.sum())

    sub = X[rows[:, None], feats[None, :]].astype(np.int64)
    idx = (sub + offs).ravel()
    cnt = mult[rows].astype(np.float64)
    yr = y[rows]
    hneg = np.bincount(idx, weights=np.repeat(cnt * (yr == 0), k), minlength=total).astype(np.int64)
    hpos = np.bincount(idx, weights=np.repeat(cnt * (yr != 0), k), minlength=total).astype(np.int64)

    n0 = int(hneg[: nv[0]].sum())
    n1 = int(hpos[: nv[0]].sum())
    seg = np.repeat(np.arange(k), nv)
    c0 = np.cumsum(hneg)
    c1 = np.cumsum(hpos)
    start = offs[seg]
    base0 = np.concatenate(([0], c0))[start]
    base1 = np.concatenate(([0], c1))[start]
    l0 = c0 - base0
    l1 = c1 - base1
    r0 = n0 - l0
    r1 = n1 - l1
    valid = ((hneg + hpos) > 0) & ((l0 + l1) >= min_leaf) & ((r0 + r1) >= min_leaf)
    if not valid.any():
        return None

    a = w0 * float(n0)
    b = w1 * float(n1)
    W = a + b
    parent = float(_gini(a, b))
    with np.errstate(divide="ignore", invalid="ignore"):
        aL = w0 * l0.astype(np.float64)
        bL = w1 * l1.astype(np.float64)
        aR = w0 * r0.astype(np.float64)
        bR = w1 * r1.astype(np.float64)
        WL = aL + bL
        WR = aR + bR
        dec = parent - (WL / W) * _gini(aL, bL) - (WR / W) * _gini(aR, bR)
    dec = np.where(valid, dec, -1.0)
    best = dec[valid].max()
    if not best > TIE_EPS:
        return None
    pos = int(np.flatnonzero(valid & (dec >= best - TIE_EPS))[0])
    j = int(seg[pos])
    return int(feats[j]), float(pos - offs[j]) + 0.5, float(dec[pos])


def predict_forest(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    acc = np.zeros(n, dtype=np.float64)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            cur = node[active]
            go_left = X[rows[active], feature[cur]] <= threshold[cur]
            node[active] = np.where(go_left, left[cur], right[cur])
            active = feature[node] >= 0
        acc += value[node]
    return acc / float(len(roots))
