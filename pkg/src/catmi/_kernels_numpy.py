"""Vectorized numpy implementations of the hot kernels.

This is the fallback backend; ``catmi._kernels_numba`` carries loop-level
twins of every function here.  The two backends are kept operation-order
compatible: float accumulations run over the same operands in the same
sequence, integer work is exact, and all randomness is drawn by the caller
and passed in as uniforms, so a fixed seed gives the same draws on either
backend.
"""

from __future__ import annotations

import numpy as np


def assign_classes(logpi, loglam, codes, missing, u):
    """Sample one latent class per row from log-weights, missing cells skipped.

    ``logpi`` (K,), ``loglam`` (K, p, Dmax), ``codes`` (n, p) int32,
    ``missing`` (n, p) bool, ``u`` (n,) uniforms.  Returns (n,) int32.
    """
    n, p = codes.shape
    k = logpi.shape[0]
    logw = np.repeat(logpi[None, :], n, axis=0)
    for j in range(p):
        contrib = loglam[:, j, codes[:, j]].T
        # adding literal +0.0 where missing preserves bits, matching the
        # numba twin which skips the term entirely
        logw += np.where(missing[:, j, None], 0.0, contrib)
    peak = logw.max(axis=1)
    w = np.exp(logw - peak[:, None])
    cum = np.cumsum(w, axis=1)
    t = u * cum[:, -1]
    pick = (cum <= t[:, None]).sum(axis=1)
    return np.minimum(pick, k - 1).astype(np.int32)


def draw_missing(lam, z, codes, missing, n_levels, u):
    """Redraw every missing cell from its class-conditional level distribution.

    Mutates ``codes`` in place at missing positions.  ``u`` holds one uniform
    per missing cell in row-major scan order.
    """
    rows, cols = np.nonzero(missing)
    if rows.size == 0:
        return
    sel = lam[z[rows].astype(np.int64), cols, :]
    cum = np.cumsum(sel, axis=1)
    t = u * cum[:, -1]
    pick = (cum <= t[:, None]).sum(axis=1)
    codes[rows, cols] = np.minimum(pick, n_levels[cols] - 1).astype(codes.dtype)


def class_level_counts(codes, z, n_classes, n_levels):
    """Count completed-data cells per (class, variable, level); exact int64."""
    n, p = codes.shape
    dmax = int(n_levels.max())
    out = np.zeros((n_classes, p, dmax), dtype=np.int64)
    zi = z.astype(np.int64)
    for j in range(p):
        d = int(n_levels[j])
        flat = zi * d + codes[:, j]
        out[:, j, :d] = np.bincount(flat, minlength=n_classes * d).reshape(n_classes, d)
    return out


def best_split(x, y, n_levels, n_classes, min_leaf, exhaustive_cap):
    """Best binary level-subset split over all predictors at one tree node.

    ``x`` (m, q) int32 predictor codes, ``y`` (m,) int32 target codes.
    Returns ``(pred, left, score)`` where ``left`` is a bool vector over the
    chosen predictor's level codes (padded to max(n_levels)) and ``score`` is
    sum(count_c^2)/n_left + sum(count_c^2)/n_right, to be maximized; ``pred``
    is -1 when no candidate satisfies ``min_leaf`` on both sides.

    Subset enumeration is exhaustive for predictors with at most
    ``exhaustive_cap`` present levels; beyond that only the contiguous cuts of
    the modal-class-proportion ordering are scanned.
    """
    m_rows, q = x.shape
    dmax = int(n_levels.max())
    x64 = x.astype(np.int64)
    total_counts = np.bincount(y, minlength=n_classes).astype(np.int64)
    best_pred = -1
    best_score = -np.inf
    best_left = np.zeros(dmax, dtype=np.bool_)
    for j in range(q):
        d = int(n_levels[j])
        cnt = np.bincount(x64[:, j] * n_classes + y, minlength=d * n_classes)
        cnt = cnt.reshape(d, n_classes)
        rowc = cnt.sum(axis=1)
        present = np.flatnonzero(rowc > 0)
        m = present.size
        if m < 2:
            continue
        if m <= exhaustive_cap:
            ncand = (1 << (m - 1)) - 1
            bits = (
                (np.arange(1, ncand + 1, dtype=np.int64)[:, None] >> np.arange(m - 1)) & 1
            ).astype(np.int64)
            left_counts = bits @ cnt[present[1:]]
            left_n = bits @ rowc[present[1:]]
        else:
            t_star = int(np.argmax(total_counts))
            props = cnt[present, t_star] / rowc[present]
            order = np.lexsort((present, props))
            ordered = present[order]
            left_counts = np.cumsum(cnt[ordered], axis=0)[:-1]
            left_n = np.cumsum(rowc[ordered])[:-1]
            ncand = m - 1
        right_counts = total_counts[None, :] - left_counts
        right_n = m_rows - left_n
        valid = (left_n >= min_leaf) & (right_n >= min_leaf)
        if not valid.any():
            continue
        # class loop keeps the accumulation order identical to the numba twin
        a_left = np.zeros(ncand)
        a_right = np.zeros(ncand)
        for c in range(n_classes):
            lc = left_counts[:, c].astype(np.float64)
            a_left += lc * lc
            rc = right_counts[:, c].astype(np.float64)
            a_right += rc * rc
        score = a_left / left_n + a_right / right_n
        score[~valid] = -np.inf
        k = int(np.argmax(score))
        if score[k] > best_score:
            best_score = float(score[k])
            best_pred = j
            left = np.zeros(dmax, dtype=np.bool_)
            if m <= exhaustive_cap:
                left[present[1:][bits[k].astype(bool)]] = True
            else:
                left[ordered[: k + 1]] = True
            best_left = left
    return best_pred, best_left, best_score


def route_rows(codes, feature, child_left, child_right, route_offset, route_table,
               majority_left, leaf_id):
    """Drop rows down a fitted tree; returns the leaf id per row.

    Route table entries: 1 go left, 0 go right, 2 level unseen at fit time,
    fall through to the child that held the majority of fitting rows.
    """
    m = codes.shape[0]
    cur = np.zeros(m, dtype=np.int64)
    while True:
        active = np.flatnonzero(feature[cur] >= 0)
        if active.size == 0:
            break
        nodes = cur[active]
        lev = codes[active, feature[nodes]].astype(np.int64)
        r = route_table[route_offset[nodes] + lev]
        go_left = (r == 1) | ((r == 2) & majority_left[nodes])
        cur[active] = np.where(go_left, child_left[nodes], child_right[nodes])
    return leaf_id[cur].astype(np.int32)
