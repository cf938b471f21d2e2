"""Compiled CART growth and descent.

Trees are flat arrays indexed by node id; a leaf has ``feature == -1``.
A bootstrap resample is represented by per-row multiplicities, which grows
exactly the tree the duplicated rows would. Each node's rows are contiguous
segments of per-feature presorted arrays, so finding a split is a linear
scan and splitting is a stable partition of every segment.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LEAF = -1
TIE_RTOL = 1e-12


@njit(cache=True, nogil=True)
def presort(X):
    n, p = X.shape
    order = np.empty((p, n), dtype=np.int64)
    for f in range(p):
        order[f] = np.argsort(X[:, f], kind="mergesort")
    return order


@njit(cache=True, nogil=True)
def bootstrap_counts(n, seed):
    """Multiplicity of each row in ``n`` draws with replacement."""
    np.random.seed(seed)
    counts = np.zeros(n, dtype=np.int64)
    for _ in range(n):
        counts[np.random.randint(0, n)] += 1
    return counts


@njit(cache=True, nogil=True)
def grow_tree(X, y, order, bootstrap, q, min_samples_split, seed):
    """Grow one unpruned regression tree.

    ``order`` is ``presort(X)``. Returns ``(feature, threshold, left, right,
    value)`` arrays trimmed to the number of nodes.
    """
    n, p = X.shape
    if bootstrap:
        counts = bootstrap_counts(n, seed)
    else:
        np.random.seed(seed)
        counts = np.ones(n, dtype=np.int64)
    m = 0
    for i in range(n):
        if counts[i] > 0:
            m += 1

    # per-feature sorted segments: row index, feature value, target, weight
    sidx = np.empty((p, m), dtype=np.int64)
    sx = np.empty((p, m))
    for f in range(p):
        k = 0
        for j in range(n):
            r = order[f, j]
            if counts[r] > 0:
                sidx[f, k] = r
                sx[f, k] = X[r, f]
                k += 1
    w = counts.astype(np.float64)

    cap = 2 * m
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)

    goes_left = np.zeros(n, dtype=np.bool_)
    bidx = np.empty(m, dtype=np.int64)
    bx = np.empty(m)
    perm = np.arange(p)

    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = m
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]

        total = 0.0
        weight = 0.0
        y_min = np.inf
        y_max = -np.inf
        for k in range(lo, hi):
            r = sidx[0, k]
            v = y[r]
            total += w[r] * v
            weight += w[r]
            if v < y_min:
                y_min = v
            if v > y_max:
                y_max = v
        mean = total / weight
        value[node] = mean
        if weight < min_samples_split or y_min == y_max:
            continue

        sse = 0.0
        for k in range(lo, hi):
            r = sidx[0, k]
            d = y[r] - mean
            sse += w[r] * d * d
        tie_tol = TIE_RTOL * sse

        if q < p:
            for i in range(p):
                j = np.random.randint(i, p)
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp
        else:
            for i in range(p):
                perm[i] = i

        best_gain = -1.0
        best_f = -1
        best_thr = 0.0
        visited = 0
        for slot in range(p):
            if visited >= q:
                break
            f = perm[slot]
            if sx[f, lo] == sx[f, hi - 1]:
                continue
            visited += 1
            acc = 0.0
            wl = 0.0
            for k in range(lo, hi - 1):
                r = sidx[f, k]
                acc += w[r] * (y[r] - mean)
                wl += w[r]
                a = sx[f, k]
                b = sx[f, k + 1]
                if a == b:
                    continue
                gain = acc * acc * weight / (wl * (weight - wl))
                if gain > best_gain + tie_tol:
                    better = True
                elif gain >= best_gain - tie_tol:
                    thr = 0.5 * (a + b)
                    if thr <= a:
                        thr = b
                    better = f < best_f or (f == best_f and thr < best_thr)
                else:
                    better = False
                if better:
                    thr = 0.5 * (a + b)
                    if thr <= a:
                        thr = b
                    best_gain = gain
                    best_f = f
                    best_thr = thr
        if best_f < 0:
            continue

        n_left = 0
        for k in range(lo, hi):
            flag = sx[best_f, k] < best_thr
            goes_left[sidx[best_f, k]] = flag
            if flag:
                n_left += 1
        for f in range(p):
            a = lo
            b = lo + n_left
            for k in range(lo, hi):
                r = sidx[f, k]
                if goes_left[r]:
                    bidx[a] = r
                    bx[a] = sx[f, k]
                    a += 1
                else:
                    bidx[b] = r
                    bx[b] = sx[f, k]
                    b += 1
            for k in range(lo, hi):
                sidx[f, k] = bidx[k]
                sx[f, k] = bx[k]

        feature[node] = best_f
        threshold[node] = best_thr
        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        left[node] = left_id
        right[node] = right_id
        # right pushed first so the left subtree is expanded first
        stack_node[top] = right_id
        stack_lo[top] = lo + n_left
        stack_hi[top] = hi
        top += 1
        stack_node[top] = left_id
        stack_lo[top] = lo
        stack_hi[top] = lo + n_left
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def descend(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        node = 0
        while feature[node] != LEAF:
            if X[i, feature[node]] < threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out
