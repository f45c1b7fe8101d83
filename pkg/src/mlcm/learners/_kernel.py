"""Compiled CART kernels shared by the tree, forest, and boosting learners.

Trees are stored as packed parallel arrays (feature, threshold, left, right,
value) plus per-tree offsets, so whole ensembles are grown and evaluated
inside numba without Python objects.

The growth kernel works on pre-sorted columns: features are argsorted once
per fit, and node partitions keep every feature's segment sorted (stable
split of the parent segment between ping-pong buffers), so no sorting
happens inside the tree loop.

All randomness (bootstrap draws, subsampling, per-split feature subsets)
comes from an explicit splitmix64 state seeded per tree, which makes results
independent of thread count and of numba's global RNG; sampling uses modulo
reduction, whose bias is negligible for any realistic row count.

Split search: exhaustive scan over each candidate feature's sorted values;
candidate thresholds are midpoints between consecutive distinct values; the
first strictly-best gain wins, and because features are scanned in ascending
column order and thresholds in ascending value order, ties resolve to the
lowest feature index, then the lowest threshold. Gain is the reduction in
the node's sum of squared errors and must be strictly positive.
``importance`` accumulates that SSE reduction per feature across the whole
ensemble.
"""

import numpy as np
from numba import njit

__all__ = [
    "tree_seed",
    "presort_columns",
    "grow_forest",
    "grow_gbm",
    "predict_ensemble",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

#: sampling modes for the growth kernels
SAMPLE_NONE = 0
SAMPLE_BOOTSTRAP = 1
SAMPLE_WITHOUT_REPLACEMENT = 2


def tree_seed(seed: int, index: int) -> np.uint64:
    """Per-tree kernel seed: ``SeedSequence((seed, index))`` as one uint64.

    A counter-based scheme — tree ``index`` always gets the same stream for a
    given estimator seed, regardless of growth order or worker count.
    """
    return np.random.SeedSequence((int(seed), int(index))).generate_state(
        1, dtype=np.uint64
    )[0]


def tree_seeds(seed: int, n_trees: int) -> np.ndarray:
    """Vector of per-tree seeds ``tree_seed(seed, 0..n_trees-1)``."""
    return np.array([tree_seed(seed, i) for i in range(n_trees)], dtype=np.uint64)


def presort_columns(XT: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Row ids sorted by each column's value, restricted to ``rows``.

    Parameters
    ----------
    XT : float64 (d, n_full)
        Transposed feature matrix (column-major access pattern).
    rows : int32 (n_base,)
        Distinct training row ids.

    Returns
    -------
    int32 (d, n_base): computed once per fit, shared by every tree.
    """
    out = np.empty((XT.shape[0], rows.shape[0]), dtype=np.int32)
    for f in range(XT.shape[0]):
        out[f] = rows[np.argsort(XT[f, rows], kind="stable")]
    return out


@njit(cache=True)
def _next_u64(state):
    """splitmix64 step: returns (new_state, output)."""
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True)
def _grow_one(
    XT,
    y,
    rows,
    base_sorted,
    min_node,
    max_depth,
    mtry,
    seed,
    sample_mode,
    subsample_k,
    node_base,
    feature,
    threshold,
    left,
    right,
    value,
    importance,
    mult,
    sidx_a,
    sidx_b,
    side,
    stack,
    fsub,
):
    """Grow one tree into the packed arrays starting at ``node_base``.

    Workspace arrays (``mult`` .. ``fsub``) are owned by the calling kernel
    and reused across trees. Returns the number of nodes written.
    """
    d = XT.shape[0]
    n_base = rows.shape[0]
    state = seed

    # -- realize this tree's sample as per-row multiplicities ---------------
    for i in range(n_base):
        mult[rows[i]] = 0
    if sample_mode == SAMPLE_NONE:
        for i in range(n_base):
            mult[rows[i]] += 1
        n_samp = n_base
    elif sample_mode == SAMPLE_BOOTSTRAP:
        n_u = np.uint64(n_base)
        for i in range(n_base):
            state, z = _next_u64(state)
            mult[rows[np.int64(z % n_u)]] += 1
        n_samp = n_base
    else:
        k = subsample_k
        if k > n_base:
            k = n_base
        # partial Fisher-Yates; the caller preloads stack column 0 with the
        # row pool (the stack itself is only used after sampling)
        for j in range(k):
            state, z = _next_u64(state)
            pick = j + np.int64(z % np.uint64(n_base - j))
            tmp = stack[j, 0]
            stack[j, 0] = stack[pick, 0]
            stack[pick, 0] = tmp
        n_samp = k

    if sample_mode == SAMPLE_WITHOUT_REPLACEMENT:
        for j in range(n_samp):
            mult[stack[j, 0]] += 1

    # -- expand pre-sorted base order into this sample's sorted lists -------
    for f in range(d):
        pos = 0
        for i in range(n_base):
            r = base_sorted[f, i]
            m = mult[r]
            for _ in range(m):
                sidx_a[f, pos] = r
                pos += 1

    stack[0, 0] = node_base  # node
    stack[0, 1] = 0  # lo
    stack[0, 2] = n_samp  # hi
    stack[0, 3] = 0  # depth
    stack[0, 4] = 0  # which ping-pong buffer holds the segment
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = stack[sp, 0]
        lo = stack[sp, 1]
        hi = stack[sp, 2]
        depth = stack[sp, 3]
        buf = stack[sp, 4]
        cur = sidx_a if buf == 0 else sidx_b
        nxt = sidx_b if buf == 0 else sidx_a
        nn = hi - lo

        s = 0.0
        ss = 0.0
        for i in range(lo, hi):
            v = y[cur[0, i]]
            s += v
            ss += v * v
        value[node] = s / nn
        feature[node] = -1
        threshold[node] = 0.0  # leaf: keep packed outputs fully defined
        left[node] = -1
        right[node] = -1
        sse_node = ss - s * s / nn

        if nn < 2 * min_node:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue
        if sse_node <= 1e-12 * (abs(ss) + 1.0):
            continue  # numerically constant target

        # candidate features, ascending column order
        if mtry >= d:
            k_feat = d
            for j in range(d):
                fsub[j] = j
        else:
            k_feat = mtry
            for j in range(d):
                fsub[j] = j
            for j in range(k_feat):  # partial Fisher-Yates
                state, z = _next_u64(state)
                pick = j + np.int64(z % np.uint64(d - j))
                tmp = fsub[j]
                fsub[j] = fsub[pick]
                fsub[pick] = tmp
            for j in range(1, k_feat):  # ascending order => documented ties
                key = fsub[j]
                i2 = j - 1
                while i2 >= 0 and fsub[i2] > key:
                    fsub[i2 + 1] = fsub[i2]
                    i2 -= 1
                fsub[i2 + 1] = key

        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        for jj in range(k_feat):
            f = fsub[jj]
            col = XT[f]
            cs = 0.0
            css = 0.0
            for i in range(nn - 1):
                r = cur[f, lo + i]
                v = y[r]
                cs += v
                css += v * v
                nl = i + 1
                nr = nn - nl
                if nr < min_node:
                    break
                if nl < min_node:
                    continue
                xv = col[r]
                xn = col[cur[f, lo + i + 1]]
                if xn <= xv:
                    continue
                sse_l = css - cs * cs / nl
                rs = s - cs
                rss = ss - css
                sse_r = rss - rs * rs / nr
                gain = sse_node - sse_l - sse_r
                if gain > best_gain:
                    thr = 0.5 * (xv + xn)
                    if thr >= xn:  # adjacent floats: keep partition exact
                        thr = xv
                    best_gain = gain
                    best_f = f
                    best_thr = thr

        if best_f < 0:
            continue

        # mark sides by row id (duplicates share a side), then stable-
        # partition every feature's segment into the other buffer
        colb = XT[best_f]
        nl_count = 0
        for i in range(lo, hi):
            r = cur[best_f, i]
            if colb[r] <= best_thr:
                side[r] = 1
                nl_count += 1
            else:
                side[r] = 0
        for f in range(d):
            a = lo
            b = lo + nl_count
            for i in range(lo, hi):
                r = cur[f, i]
                if side[r] == 1:
                    nxt[f, a] = r
                    a += 1
                else:
                    nxt[f, b] = r
                    b += 1

        child = node_base + n_nodes
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = child
        right[node] = child + 1
        importance[best_f] += best_gain

        nbuf = 1 - buf
        stack[sp, 0] = child
        stack[sp, 1] = lo
        stack[sp, 2] = lo + nl_count
        stack[sp, 3] = depth + 1
        stack[sp, 4] = nbuf
        sp += 1
        stack[sp, 0] = child + 1
        stack[sp, 1] = lo + nl_count
        stack[sp, 2] = hi
        stack[sp, 3] = depth + 1
        stack[sp, 4] = nbuf
        sp += 1
        n_nodes += 2

    return n_nodes


@njit(cache=True)
def grow_forest(
    XT,
    y,
    rows,
    base_sorted,
    n_trees,
    min_node,
    max_depth,
    mtry,
    seeds,
    sample_mode,
    feature,
    threshold,
    left,
    right,
    value,
    offsets,
    importance,
):
    """Grow ``n_trees`` independent trees into the packed output arrays.

    ``offsets`` receives ``n_trees + 1`` node offsets; returns total nodes.
    """
    d = XT.shape[0]
    n_full = XT.shape[1]
    n_base = rows.shape[0]

    mult = np.zeros(n_full, np.int32)
    sidx_a = np.empty((d, n_base), np.int32)
    sidx_b = np.empty((d, n_base), np.int32)
    side = np.zeros(n_full, np.uint8)
    stack = np.empty((2 * n_base + 16, 5), np.int32)
    fsub = np.empty(d, np.int32)

    node_base = 0
    offsets[0] = 0
    for t in range(n_trees):
        n_nodes = _grow_one(
            XT,
            y,
            rows,
            base_sorted,
            min_node,
            max_depth,
            mtry,
            seeds[t],
            sample_mode,
            0,
            node_base,
            feature,
            threshold,
            left,
            right,
            value,
            importance,
            mult,
            sidx_a,
            sidx_b,
            side,
            stack,
            fsub,
        )
        node_base += n_nodes
        offsets[t + 1] = node_base
    return node_base


@njit(cache=True)
def _predict_rows_one(feature, threshold, left, right, value, root, XT, out, scale):
    """Add scaled predictions of the tree rooted at ``root`` for all columns
    of ``XT`` (transposed feature layout)."""
    for r in range(XT.shape[1]):
        node = root
        while feature[node] >= 0:
            if XT[feature[node], r] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] += scale * value[node]


@njit(cache=True)
def grow_gbm(
    XT,
    y,
    rows,
    base_sorted,
    n_trees,
    min_node,
    max_depth,
    learning_rate,
    subsample_k,
    seeds,
    feature,
    threshold,
    left,
    right,
    value,
    offsets,
    importance,
):
    """Grow a stochastic gradient-boosting ensemble (squared loss).

    Each stage fits a tree to the current residuals on a without-replacement
    subsample of the training rows and adds ``learning_rate`` times its
    prediction. Returns (total_nodes, base_value). Residuals are tracked on
    the training rows only.
    """
    d = XT.shape[0]
    n_full = XT.shape[1]
    n_base = rows.shape[0]

    base = 0.0
    for i in range(n_base):
        base += y[rows[i]]
    base /= n_base

    resid = np.empty(n_full, np.float64)
    for i in range(n_base):
        r = rows[i]
        resid[r] = y[r] - base

    mult = np.zeros(n_full, np.int32)
    sidx_a = np.empty((d, n_base), np.int32)
    sidx_b = np.empty((d, n_base), np.int32)
    side = np.zeros(n_full, np.uint8)
    stack = np.empty((2 * n_base + 16, 5), np.int32)
    fsub = np.empty(d, np.int32)

    node_base = 0
    offsets[0] = 0
    for t in range(n_trees):
        # the subsample shuffle pool lives in stack column 0
        for i in range(n_base):
            stack[i, 0] = rows[i]
        n_nodes = _grow_one(
            XT,
            resid,
            rows,
            base_sorted,
            min_node,
            max_depth,
            d,  # boosting scans every feature
            seeds[t],
            SAMPLE_WITHOUT_REPLACEMENT,
            subsample_k,
            node_base,
            feature,
            threshold,
            left,
            right,
            value,
            importance,
            mult,
            sidx_a,
            sidx_b,
            side,
            stack,
            fsub,
        )
        # update residuals on all training rows
        for i in range(n_base):
            r = rows[i]
            node = node_base
            while feature[node] >= 0:
                if XT[feature[node], r] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            resid[r] -= learning_rate * value[node]
        node_base += n_nodes
        offsets[t + 1] = node_base
    return node_base, base


@njit(cache=True)
def predict_ensemble(feature, threshold, left, right, value, offsets, XT, out, scale):
    """Add ``scale`` times the summed tree predictions into ``out``.

    ``XT`` is the transposed (d, n_rows) feature matrix; ``out`` must have
    n_rows entries. Forests pass ``scale = 1 / n_trees``; boosting passes the
    learning rate (on top of its base value).
    """
    n_trees = offsets.shape[0] - 1
    for t in range(n_trees):
        _predict_rows_one(
            feature, threshold, left, right, value, offsets[t], XT, out, scale
        )
    return out
