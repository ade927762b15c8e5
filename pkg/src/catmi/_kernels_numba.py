"""Numba loop implementations of the hot kernels.

Each function mirrors its twin in ``catmi._kernels_numpy`` operand for
operand; see that module for the semantics.  Compiled objects are cached on
disk so repeated runs skip JIT cost.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def assign_classes(logpi, loglam, codes, missing, u):
    n, p = codes.shape
    k = logpi.shape[0]
    out = np.empty(n, dtype=np.int32)
    w = np.empty(k)
    for i in range(n):
        peak = -np.inf
        for a in range(k):
            acc = logpi[a]
            for j in range(p):
                if not missing[i, j]:
                    acc += loglam[a, j, codes[i, j]]
            w[a] = acc
            if acc > peak:
                peak = acc
        tot = 0.0
        for a in range(k):
            w[a] = np.exp(w[a] - peak)
            tot += w[a]
        t = u[i] * tot
        acc = 0.0
        pick = k - 1
        for a in range(k):
            acc += w[a]
            if t < acc:
                pick = a
                break
        out[i] = pick
    return out


@njit(cache=True)
def draw_missing(lam, z, codes, missing, n_levels, u):
    n, p = codes.shape
    m = 0
    for i in range(n):
        for j in range(p):
            if missing[i, j]:
                d = n_levels[j]
                a = z[i]
                tot = 0.0
                for y in range(d):
                    tot += lam[a, j, y]
                t = u[m] * tot
                acc = 0.0
                pick = d - 1
                for y in range(d):
                    acc += lam[a, j, y]
                    if t < acc:
                        pick = y
                        break
                codes[i, j] = pick
                m += 1


@njit(cache=True)
def class_level_counts(codes, z, n_classes, n_levels):
    n, p = codes.shape
    dmax = 0
    for j in range(p):
        if n_levels[j] > dmax:
            dmax = n_levels[j]
    out = np.zeros((n_classes, p, dmax), dtype=np.int64)
    for i in range(n):
        a = z[i]
        for j in range(p):
            out[a, j, codes[i, j]] += 1
    return out


@njit(cache=True)
def _scan_candidate(left_counts, right_counts, left_n, right_n, n_classes):
    a_left = 0.0
    a_right = 0.0
    for c in range(n_classes):
        lc = float(left_counts[c])
        a_left += lc * lc
        rc = float(right_counts[c])
        a_right += rc * rc
    return a_left / left_n + a_right / right_n


@njit(cache=True)
def best_split(x, y, n_levels, n_classes, min_leaf, exhaustive_cap):
    m_rows, q = x.shape
    dmax = 0
    for j in range(q):
        if n_levels[j] > dmax:
            dmax = n_levels[j]
    total_counts = np.zeros(n_classes, dtype=np.int64)
    for i in range(m_rows):
        total_counts[y[i]] += 1
    best_pred = -1
    best_score = -np.inf
    best_left = np.zeros(dmax, dtype=np.bool_)
    lcounts = np.empty(n_classes, dtype=np.int64)
    rcounts = np.empty(n_classes, dtype=np.int64)
    for j in range(q):
        d = int(n_levels[j])
        cnt = np.zeros((d, n_classes), dtype=np.int64)
        rowc = np.zeros(d, dtype=np.int64)
        for i in range(m_rows):
            cnt[x[i, j], y[i]] += 1
            rowc[x[i, j]] += 1
        m = 0
        for lev in range(d):
            if rowc[lev] > 0:
                m += 1
        if m < 2:
            continue
        present = np.empty(m, dtype=np.int64)
        pos = 0
        for lev in range(d):
            if rowc[lev] > 0:
                present[pos] = lev
                pos += 1
        if m <= exhaustive_cap:
            ncand = (1 << (m - 1)) - 1
            for mask in range(1, ncand + 1):
                left_n = 0
                for c in range(n_classes):
                    lcounts[c] = 0
                for b in range(m - 1):
                    if (mask >> b) & 1:
                        lev = present[b + 1]
                        left_n += rowc[lev]
                        for c in range(n_classes):
                            lcounts[c] += cnt[lev, c]
                right_n = m_rows - left_n
                if left_n < min_leaf or right_n < min_leaf:
                    continue
                for c in range(n_classes):
                    rcounts[c] = total_counts[c] - lcounts[c]
                s = _scan_candidate(lcounts, rcounts, left_n, right_n, n_classes)
                if s > best_score:
                    best_score = s
                    best_pred = j
                    for lev in range(dmax):
                        best_left[lev] = False
                    for b in range(m - 1):
                        if (mask >> b) & 1:
                            best_left[present[b + 1]] = True
        else:
            t_star = 0
            for c in range(1, n_classes):
                if total_counts[c] > total_counts[t_star]:
                    t_star = c
            props = np.empty(m)
            ordered = np.empty(m, dtype=np.int64)
            for a in range(m):
                props[a] = cnt[present[a], t_star] / rowc[present[a]]
                ordered[a] = present[a]
            # insertion sort ascending by (proportion, level code)
            for a in range(1, m):
                pv = props[a]
                cv = ordered[a]
                b = a - 1
                while b >= 0 and (props[b] > pv or (props[b] == pv and ordered[b] > cv)):
                    props[b + 1] = props[b]
                    ordered[b + 1] = ordered[b]
                    b -= 1
                props[b + 1] = pv
                ordered[b + 1] = cv
            left_n = 0
            for c in range(n_classes):
                lcounts[c] = 0
            for cut in range(m - 1):
                lev = ordered[cut]
                left_n += rowc[lev]
                for c in range(n_classes):
                    lcounts[c] += cnt[lev, c]
                right_n = m_rows - left_n
                if left_n < min_leaf or right_n < min_leaf:
                    continue
                for c in range(n_classes):
                    rcounts[c] = total_counts[c] - lcounts[c]
                s = _scan_candidate(lcounts, rcounts, left_n, right_n, n_classes)
                if s > best_score:
                    best_score = s
                    best_pred = j
                    for lev in range(dmax):
                        best_left[lev] = False
                    for a in range(cut + 1):
                        best_left[ordered[a]] = True
    return best_pred, best_left, best_score


@njit(cache=True)
def route_rows(codes, feature, child_left, child_right, route_offset, route_table,
               majority_left, leaf_id):
    m = codes.shape[0]
    out = np.empty(m, dtype=np.int32)
    for i in range(m):
        node = 0
        while feature[node] >= 0:
            r = route_table[route_offset[node] + codes[i, feature[node]]]
            if r == 1 or (r == 2 and majority_left[node]):
                node = child_left[node]
            else:
                node = child_right[node]
        out[i] = leaf_id[node]
    return out
