"""Tree building, split search, routing, and Bayesian-bootstrap imputation."""

import numpy as np
import pytest

from catmi.cart import (
    CartEngine,
    build_tree,
    find_split,
    gini_impurity,
    impute_from_tree,
)


def _gender_race_fixture(rows_per_cell=50):
    # outcome fully determined by (gender, race); the race=2 group shares one
    # outcome across genders so a correct tree merges it into a single leaf
    outcome_of = {(0, 0): 0, (1, 0): 1, (0, 1): 2, (1, 1): 3, (0, 2): 4, (1, 2): 4}
    rows, ys = [], []
    for (g, r), out in outcome_of.items():
        rows += [(g, r)] * rows_per_cell
        ys += [out] * rows_per_cell
    return (np.array(rows, dtype=np.int32), np.array(ys, dtype=np.int32),
            outcome_of)


def test_gini_arithmetic():
    assert gini_impurity(np.array([0, 0, 1, 1]), 2) == 0.5
    assert gini_impurity(np.array([1, 1, 1]), 2) == 0.0


def test_perfect_binary_split():
    y = np.array([0, 0, 1, 1], dtype=np.int32)
    x = np.array([0, 0, 1, 1], dtype=np.int32)
    left, decrease = find_split(y, x, 2, 2, min_leaf=1)
    assert decrease == pytest.approx(0.5)
    assert list(left) in ([0], [1])


def test_find_split_requires_two_levels():
    with pytest.raises(ValueError):
        find_split(np.array([0, 1], dtype=np.int32),
                   np.array([0, 0], dtype=np.int32), 3, 2)


def test_find_split_min_leaf_infeasible():
    y = np.array([0, 1, 0], dtype=np.int32)
    x = np.array([0, 1, 0], dtype=np.int32)
    left, decrease = find_split(y, x, 2, 2, min_leaf=2)
    assert left is None and decrease == 0.0


def test_three_level_candidates_match_exhaustive_count():
    # all 2^(3-1)-1 = 3 subsets are scanned; best has the full decrease
    rng = np.random.default_rng(0)
    x = rng.integers(0, 3, size=600).astype(np.int32)
    y = (x == 2).astype(np.int32)  # level 2 separates the target
    left, decrease = find_split(y, x, 3, 2, min_leaf=1)
    assert set(left.tolist()) in ({2}, {0, 1})
    assert decrease == pytest.approx(gini_impurity(y, 2), rel=1e-12)


def test_heuristic_cut_count_for_many_levels():
    # 32 levels with the exhaustive cap at 12: the ordering heuristic scans
    # 31 contiguous cuts and still finds a valid split quickly
    rng = np.random.default_rng(1)
    x = rng.integers(0, 32, size=4000).astype(np.int32)
    y = (x >= 16).astype(np.int32)
    left, decrease = find_split(y, x, 32, 2, min_leaf=4, exhaustive_cap=12)
    assert decrease == pytest.approx(gini_impurity(y, 2), rel=1e-6)
    assert set(left.tolist()) in ({*range(16)}, {*range(16, 32)})


def test_heuristic_matches_exhaustive_for_binary_targets():
    rng = np.random.default_rng(2)
    for trial in range(40):
        m = int(rng.integers(30, 200))
        x = rng.integers(0, 3, size=m).astype(np.int32)
        y = rng.integers(0, 2, size=m).astype(np.int32)
        if np.unique(x).size < 2:
            continue
        exh = find_split(y, x, 3, 2, min_leaf=1, exhaustive_cap=12)
        heur = find_split(y, x, 3, 2, min_leaf=1, exhaustive_cap=2)
        if exh[0] is None:
            assert heur[0] is None
        else:
            assert heur[1] == pytest.approx(exh[1], abs=0)


def test_figure_layout_partition():
    x, y, outcome_of = _gender_race_fixture()
    tree = build_tree(y, x, np.array([2, 3]), 5, min_leaf=4, cp=1e-4)
    groups = sorted(
        sorted(set(map(tuple, x[tree.leaf_rows(leaf)].tolist())))
        for leaf in range(tree.n_leaves)
    )
    assert groups == [[(0, 0)], [(0, 1)], [(0, 2), (1, 2)], [(1, 0)], [(1, 1)]]


def test_every_row_in_exactly_one_leaf():
    rng = np.random.default_rng(3)
    x = rng.integers(0, 4, size=(500, 3)).astype(np.int32)
    y = rng.integers(0, 3, size=500).astype(np.int32)
    tree = build_tree(y, x, np.array([4, 4, 4]), 3)
    seen = np.concatenate([tree.leaf_rows(l) for l in range(tree.n_leaves)])
    assert sorted(seen.tolist()) == list(range(500))
    sizes = tree.leaf_end - tree.leaf_start
    assert sizes.min() >= tree.min_leaf


def test_accepted_splits_beat_cp_threshold():
    rng = np.random.default_rng(4)
    x = rng.integers(0, 3, size=(600, 4)).astype(np.int32)
    y = ((x[:, 0] == 1) | (x[:, 2] == 2)).astype(np.int32)
    cp = 1e-3
    tree = build_tree(y, x, np.array([3, 3, 3, 3]), 2, cp=cp)
    for node in range(tree.n_nodes):
        if tree.feature[node] < 0:
            continue
        left = tree.child_left[node]
        right = tree.child_right[node]

        def node_rows(v):
            if tree.leaf_id[v] >= 0:
                return tree.leaf_rows(int(tree.leaf_id[v]))
            return np.concatenate([node_rows(tree.child_left[v]),
                                   node_rows(tree.child_right[v])])

        rows_l, rows_r = node_rows(left), node_rows(right)
        rows = np.concatenate([rows_l, rows_r])
        parent = gini_impurity(y[rows], 2)
        weighted = (len(rows_l) * gini_impurity(y[rows_l], 2)
                    + len(rows_r) * gini_impurity(y[rows_r], 2)) / len(rows)
        assert parent - weighted > cp * tree.root_impurity


def test_root_only_when_target_independent_and_cp_large():
    rng = np.random.default_rng(5)
    x = rng.integers(0, 3, size=(400, 3)).astype(np.int32)
    y = rng.integers(0, 2, size=400).astype(np.int32)
    tree = build_tree(y, x, np.array([3, 3, 3]), 2, cp=0.5)
    assert tree.n_leaves == 1


def test_build_deterministic():
    rng = np.random.default_rng(6)
    x = rng.integers(0, 4, size=(300, 3)).astype(np.int32)
    y = rng.integers(0, 3, size=300).astype(np.int32)
    t1 = build_tree(y, x, np.array([4, 4, 4]), 3)
    t2 = build_tree(y, x, np.array([4, 4, 4]), 3)
    assert np.array_equal(t1.feature, t2.feature)
    assert np.array_equal(t1.fit_rows, t2.fit_rows)
    assert np.array_equal(t1.route_table, t2.route_table)


def test_unseen_level_routes_to_majority_child():
    x, y, _ = _gender_race_fixture()
    keep = x[:, 1] != 2  # drop race level 2 from fitting
    tree = build_tree(y[keep], x[keep], np.array([2, 3]), 5)
    root_feature = int(tree.feature[0])
    probe = np.array([[0, 2]], dtype=np.int32)
    leaf = tree.route(probe)
    assert 0 <= leaf[0] < tree.n_leaves
    # majority routing is deterministic
    assert np.array_equal(tree.route(probe), leaf)
    assert root_feature in (0, 1)


def test_degenerate_leaf_imputes_single_value():
    y = np.full(20, 3, dtype=np.int32)
    x = np.zeros((20, 1), dtype=np.int32)
    x[10:] = 1
    tree = build_tree(y, x, np.array([2]), 4)
    rows = np.array([[0], [1]], dtype=np.int32)
    out = impute_from_tree(tree, y, rows, np.random.default_rng(0))
    assert np.all(out == 3)


def test_leaf_bootstrap_marginal_frequencies():
    # pool [0, 0, 1]: averaged over Dirichlet(1,1,1) weights the draw
    # probabilities are (2/3, 1/3)
    y = np.array([0, 0, 1], dtype=np.int32)
    x = np.zeros((3, 1), dtype=np.int32)
    tree = build_tree(y, x, np.array([2]), 2, min_leaf=1, cp=0.9)
    assert tree.n_leaves == 1
    rng = np.random.default_rng(1)
    draws = np.concatenate(
        [impute_from_tree(tree, y, np.zeros((1, 1), dtype=np.int32), rng)
         for _ in range(10_000)]
    )
    freq = (draws == 0).mean()
    assert abs(freq - 2 / 3) < 3 * np.sqrt(2 / 9 / 10_000) + 0.01


def test_root_only_tree_draws_weighted_marginal():
    y = np.array([0, 1, 1, 1], dtype=np.int32)
    x = np.zeros((4, 1), dtype=np.int32)
    tree = build_tree(y, x, np.array([2]), 2, cp=0.9)
    out = impute_from_tree(tree, y, np.zeros((2000, 1), dtype=np.int32),
                           np.random.default_rng(2))
    assert set(np.unique(out)) <= {0, 1}
    assert 0.05 < (out == 0).mean() < 0.5


def test_engine_interface_on_partial_column():
    rng = np.random.default_rng(7)
    engine = CartEngine()
    n = 400
    predictors = rng.integers(0, 3, size=(n, 2)).astype(np.int32)
    target = (predictors[:, 0] == 1).astype(np.int32)
    observed = rng.random(n) < 0.7
    drawn = engine.fit_and_draw(target, observed, predictors,
                                np.array([3, 3]), 2, rng, "T")
    truth = (predictors[~observed, 0] == 1).astype(np.int32)
    assert (drawn == truth).mean() > 0.9
