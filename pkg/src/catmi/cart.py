"""Classification-tree conditional engine: Gini splits, Bayesian bootstrap leaves.

Trees partition on binary level subsets.  A split is kept only when both
children hold at least ``min_leaf`` fitting rows and the Gini decrease
exceeds ``cp`` times the root impurity.  Subset search is exhaustive up to
``exhaustive_cap`` present levels; beyond that, levels are ordered by the
proportion of the node's modal target class and only the contiguous cuts of
that ordering are scanned (exact for binary targets).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .chained import ConditionalEngine


def gini_impurity(y, n_classes: int) -> float:
    """1 - sum of squared class proportions."""
    counts = np.bincount(np.asarray(y, dtype=np.int64), minlength=n_classes)
    return _gini_from_counts(counts)


def _sum_sq(counts) -> float:
    acc = 0.0
    for c in counts:
        f = float(c)
        acc += f * f
    return acc


def _gini_from_counts(counts) -> float:
    n = float(np.sum(counts))
    if n == 0.0:
        return 0.0
    return 1.0 - _sum_sq(counts) / (n * n)


def _decrease_from_score(score: float, counts, n_node: int) -> float:
    # score = sum_c c_L^2 / n_L + sum_c c_R^2 / n_R; the weighted-children
    # impurity equals 1 - score / n, so the decrease below is exactly
    # parent_gini - weighted_children_gini
    nf = float(n_node)
    return score / nf - _sum_sq(counts) / (nf * nf)


@dataclass
class Tree:
    """Recursive partition stored as flat arrays; leaves own fitting-row pools."""

    n_classes: int
    pred_n_levels: np.ndarray
    min_leaf: int
    cp: float
    root_impurity: float
    feature: np.ndarray       # (nodes,) split predictor, -1 at leaves
    child_left: np.ndarray
    child_right: np.ndarray
    majority_left: np.ndarray  # fallback direction for levels unseen at fit time
    route_offset: np.ndarray
    route_table: np.ndarray    # int8 per (node, level): 1 left, 0 right, 2 unseen
    leaf_id: np.ndarray        # (nodes,) -1 at internal nodes
    leaf_start: np.ndarray
    leaf_end: np.ndarray
    fit_rows: np.ndarray       # permutation of fitting-row indices

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_start)

    def leaf_rows(self, leaf: int) -> np.ndarray:
        return self.fit_rows[self.leaf_start[leaf]:self.leaf_end[leaf]]

    def route(self, rows: np.ndarray) -> np.ndarray:
        """Leaf id for every row of predictor codes."""
        rows = np.ascontiguousarray(rows, dtype=np.int32)
        return kernels.route_rows(
            rows, self.feature, self.child_left, self.child_right,
            self.route_offset, self.route_table, self.majority_left, self.leaf_id,
        )


def build_tree(y, predictors, pred_n_levels, n_classes, *, min_leaf=4,
               cp=1e-4, exhaustive_cap=12) -> Tree:
    """Greedy recursive binary splitting minimizing weighted Gini impurity.

    Deterministic given inputs; only leaf sampling consumes randomness.
    Intended for at least 2 * min_leaf fitting rows (a root-only tree is the
    degenerate result below that).
    """
    if min_leaf < 1:
        raise ValueError("min_leaf must be at least 1")
    if cp < 0.0:
        raise ValueError("cp must be nonnegative")
    if not 1 <= exhaustive_cap <= 20:
        raise ValueError("exhaustive_cap must be between 1 and 20")
    y = np.ascontiguousarray(y, dtype=np.int32)
    predictors = np.ascontiguousarray(predictors, dtype=np.int32)
    pred_n_levels = np.asarray(pred_n_levels, dtype=np.int64)
    n_fit = len(y)
    row_index = np.arange(n_fit, dtype=np.int64)
    root_counts = np.bincount(y.astype(np.int64), minlength=n_classes)
    root_impurity = _gini_from_counts(root_counts)

    feature, child_left, child_right = [], [], []
    majority_left, route_offset, leaf_id = [], [], []
    table_chunks, leaf_start, leaf_end = [], [], []
    table_len = 0

    def new_node():
        feature.append(-1)
        child_left.append(-1)
        child_right.append(-1)
        majority_left.append(False)
        route_offset.append(0)
        leaf_id.append(-1)
        return len(feature) - 1

    stack = [(new_node(), 0, n_fit)]
    while stack:
        node, start, end = stack.pop()
        rows = row_index[start:end]
        ysub = y[rows]
        n_node = end - start
        counts = np.bincount(ysub.astype(np.int64), minlength=n_classes)
        pred = -1
        if n_node >= 2 * min_leaf and _gini_from_counts(counts) > 0.0:
            xsub = np.ascontiguousarray(predictors[rows])
            pred, left_levels, score = kernels.best_split(
                xsub, ysub, pred_n_levels, n_classes, min_leaf, exhaustive_cap
            )
            if pred >= 0:
                decrease = _decrease_from_score(score, counts, n_node)
                if not decrease > cp * root_impurity:
                    pred = -1
        if pred < 0:
            leaf_id[node] = len(leaf_start)
            leaf_start.append(start)
            leaf_end.append(end)
            continue
        d = int(pred_n_levels[pred])
        go_left = left_levels[xsub[:, pred]]
        n_left = int(go_left.sum())
        left_rows = rows[go_left]
        right_rows = rows[~go_left]  # copy before writing: rows views row_index
        row_index[start:start + n_left] = left_rows
        row_index[start + n_left:end] = right_rows
        present = np.bincount(xsub[:, pred].astype(np.int64), minlength=d) > 0
        table = np.where(present, np.where(left_levels[:d], 1, 0), 2).astype(np.int8)
        feature[node] = int(pred)
        majority_left[node] = n_left >= n_node - n_left
        route_offset[node] = table_len
        table_chunks.append(table)
        table_len += d
        left_child = new_node()
        right_child = new_node()
        child_left[node] = left_child
        child_right[node] = right_child
        stack.append((right_child, start + n_left, end))
        stack.append((left_child, start, start + n_left))

    return Tree(
        n_classes=n_classes,
        pred_n_levels=pred_n_levels,
        min_leaf=min_leaf,
        cp=cp,
        root_impurity=root_impurity,
        feature=np.array(feature, dtype=np.int64),
        child_left=np.array(child_left, dtype=np.int64),
        child_right=np.array(child_right, dtype=np.int64),
        majority_left=np.array(majority_left, dtype=bool),
        route_offset=np.array(route_offset, dtype=np.int64),
        route_table=(np.concatenate(table_chunks) if table_chunks
                     else np.zeros(0, dtype=np.int8)),
        leaf_id=np.array(leaf_id, dtype=np.int64),
        leaf_start=np.array(leaf_start, dtype=np.int64),
        leaf_end=np.array(leaf_end, dtype=np.int64),
        fit_rows=row_index,
    )


def find_split(y, x, n_levels_j: int, n_classes: int, *, min_leaf=4,
               exhaustive_cap=12):
    """Best level subset for one predictor at one node.

    Returns (left_level_codes, impurity_decrease); (None, 0.0) when no
    candidate satisfies the min_leaf constraint.
    """
    y = np.ascontiguousarray(y, dtype=np.int32)
    x = np.ascontiguousarray(x, dtype=np.int32)
    if np.unique(x).size < 2:
        raise ValueError("find_split needs a predictor with >= 2 observed levels")
    pred, left, score = kernels.best_split(
        x[:, None].copy(), y, np.array([n_levels_j], dtype=np.int64),
        n_classes, min_leaf, exhaustive_cap,
    )
    if pred < 0:
        return None, 0.0
    counts = np.bincount(y.astype(np.int64), minlength=n_classes)
    decrease = _decrease_from_score(score, counts, len(y))
    return np.flatnonzero(left[:n_levels_j]).astype(np.int64), decrease


def impute_from_tree(tree: Tree, fit_target, rows, rng) -> np.ndarray:
    """Route rows to leaves, then sample with Bayesian-bootstrap leaf weights.

    Dirichlet(1, ..., 1) weights over each leaf's fitting rows are drawn once
    per call, in ascending leaf order over the leaves that receive rows.
    """
    fit_target = np.asarray(fit_target)
    rows = np.ascontiguousarray(rows, dtype=np.int32)
    leaves = tree.route(rows)
    out = np.empty(len(rows), dtype=np.int32)
    for leaf in np.unique(leaves):
        targets = np.flatnonzero(leaves == leaf)
        pool = fit_target[tree.leaf_rows(int(leaf))]
        weights = rng.dirichlet(np.ones(len(pool)))
        cum = np.cumsum(weights)
        t = rng.random(len(targets)) * cum[-1]
        pick = np.minimum(np.searchsorted(cum, t, side="right"), len(pool) - 1)
        out[targets] = pool[pick]
    return out


class CartEngine(ConditionalEngine):
    """Conditional engine backed by a classification tree per target variable."""

    def __init__(self, min_leaf=4, cp=1e-4, exhaustive_cap=12):
        self.min_leaf = min_leaf
        self.cp = cp
        self.exhaustive_cap = exhaustive_cap

    def fit_and_draw(self, target, observed, predictors, pred_n_levels,
                     n_classes, rng, target_name=""):
        y_obs = np.ascontiguousarray(target[observed], dtype=np.int32)
        x_obs = predictors[observed]
        need = predictors[~observed]
        if np.unique(y_obs).size == 1:
            return np.full(len(need), y_obs[0], dtype=np.int32)
        tree = build_tree(
            y_obs, x_obs, pred_n_levels, n_classes,
            min_leaf=self.min_leaf, cp=self.cp, exhaustive_cap=self.exhaustive_cap,
        )
        return impute_from_tree(tree, y_obs, need, rng)
