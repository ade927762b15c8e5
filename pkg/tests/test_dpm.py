"""Latent-class sampler mechanics: sweeps, weights, captures, determinism."""

import numpy as np
import pytest

from catmi.dpm import (
    DpmConfig,
    DpmState,
    dpm_multiple_impute,
    gibbs_step,
    init_state,
    joint_cell_probability,
    occupied_classes,
)

from conftest import random_dataset


def _run_sweeps(ds, cfg, seed, sweeps):
    rng = np.random.default_rng(seed)
    cells = ds.cells.copy()
    cells.setflags(write=True)
    state = init_state(ds.n, ds.codebook.n_levels, cfg, rng)
    for _ in range(sweeps):
        gibbs_step(state, cells, ds.missing, rng)
    return state, cells


def test_config_validation():
    with pytest.raises(ValueError):
        DpmConfig(burn_in=100, iterations=100)
    with pytest.raises(ValueError):
        DpmConfig(iterations=20, burn_in=15, n_imputations=10)
    with pytest.raises(ValueError):
        DpmConfig(n_classes=0)


def test_single_class_collapse():
    ds = random_dataset(np.random.default_rng(0), n=50, missing_rate=0.2)
    cfg = DpmConfig(n_classes=1, iterations=10, burn_in=2, n_imputations=2)
    state, cells = _run_sweeps(ds, cfg, 1, 20)
    assert np.all(state.assignments == 0)
    assert state.weights.tolist() == [1.0]
    assert occupied_classes(state) == 1
    assert state.concentration > 0


def test_weights_and_level_probs_normalized():
    ds = random_dataset(np.random.default_rng(2), n=80, missing_rate=0.3)
    cfg = DpmConfig(n_classes=6, iterations=10, burn_in=2, n_imputations=2)
    rng = np.random.default_rng(3)
    cells = ds.cells.copy()
    cells.setflags(write=True)
    state = init_state(ds.n, ds.codebook.n_levels, cfg, rng)
    d = ds.codebook.n_levels
    for _ in range(25):
        gibbs_step(state, cells, ds.missing, rng)
        assert abs(state.weights.sum() - 1.0) < 1e-12
        for j in range(ds.p):
            sums = state.level_probs[:, j, :d[j]].sum(axis=1)
            assert np.abs(sums - 1.0).max() < 1e-12


def test_observed_cells_never_altered():
    ds = random_dataset(np.random.default_rng(4), n=70, missing_rate=0.4)
    cfg = DpmConfig(n_classes=5, iterations=10, burn_in=2, n_imputations=2)
    state, cells = _run_sweeps(ds, cfg, 5, 30)
    observed = ~ds.missing
    assert np.array_equal(cells[observed], ds.cells[observed])


def test_fully_observed_step_changes_no_cells():
    ds = random_dataset(np.random.default_rng(6), n=60, missing_rate=0.0)
    cfg = DpmConfig(n_classes=4, iterations=10, burn_in=2, n_imputations=2)
    state, cells = _run_sweeps(ds, cfg, 7, 15)
    assert np.array_equal(cells, ds.cells)


def test_occupied_classes_counts_distinct():
    state = DpmState(
        assignments=np.array([0, 0, 0], dtype=np.int32),
        sticks=np.array([0.5, 1.0]), weights=np.array([0.5, 0.5]),
        level_probs=np.full((2, 1, 2), 0.5), concentration=1.0,
        n_levels=np.array([2]),
    )
    assert occupied_classes(state) == 1
    state.assignments = np.array([0, 1, 0], dtype=np.int32)
    assert occupied_classes(state) == 2


def test_joint_cell_probability_hand_case():
    state = DpmState(
        assignments=np.zeros(2, dtype=np.int32),
        sticks=np.array([0.5, 1.0]),
        weights=np.array([0.5, 0.5]),
        level_probs=np.array([
            [[0.9, 0.1], [0.9, 0.1]],
            [[0.1, 0.9], [0.1, 0.9]],
        ]),
        concentration=1.0,
        n_levels=np.array([2, 2]),
    )
    p = joint_cell_probability(state, [(0, 0), (1, 0)])
    assert p == pytest.approx(0.5 * 0.81 + 0.5 * 0.01, abs=1e-15)


def test_joint_cells_sum_to_one():
    rng = np.random.default_rng(8)
    cfg = DpmConfig(n_classes=5, iterations=10, burn_in=2, n_imputations=2)
    state = init_state(30, np.array([2, 3, 2]), cfg, rng)
    total = sum(
        joint_cell_probability(state, [(0, a), (1, b), (2, c)])
        for a in range(2) for b in range(3) for c in range(2)
    )
    assert total == pytest.approx(1.0, abs=1e-12)


def test_joint_cell_probability_rejects_duplicate_variables():
    cfg = DpmConfig(n_classes=2, iterations=10, burn_in=2, n_imputations=2)
    state = init_state(10, np.array([2, 2]), cfg, np.random.default_rng(9))
    with pytest.raises(ValueError):
        joint_cell_probability(state, [(0, 0), (0, 1)])


def test_single_class_joint_is_product_of_marginals():
    cfg = DpmConfig(n_classes=1, iterations=5, burn_in=1, n_imputations=2)
    state = init_state(10, np.array([2, 3]), cfg, np.random.default_rng(10))
    p = joint_cell_probability(state, [(0, 1), (1, 2)])
    assert p == pytest.approx(
        state.level_probs[0, 0, 1] * state.level_probs[0, 1, 2], abs=1e-15
    )


def test_capture_spacing_rule():
    ds = random_dataset(np.random.default_rng(11), n=40, missing_rate=0.3)
    cfg = DpmConfig(n_classes=3, iterations=100, burn_in=20, n_imputations=10)
    result = dpm_multiple_impute(ds, cfg, np.random.default_rng(12))
    assert result.capture_iterations.tolist() == [28, 36, 44, 52, 60, 68, 76, 84, 92, 100]
    assert len(result.datasets) == 10
    assert all(d.fully_observed for d in result.datasets)


def test_documented_capture_schedule():
    cfg = DpmConfig(n_classes=3, iterations=10_000, burn_in=2000, n_imputations=10)
    spacing = (cfg.iterations - cfg.burn_in) // cfg.n_imputations
    captures = [cfg.burn_in + spacing * m for m in range(1, 11)]
    assert captures == [2800, 3600, 4400, 5200, 6000, 6800, 7600, 8400, 9200, 10_000]


def test_fully_observed_outputs_equal_input():
    ds = random_dataset(np.random.default_rng(13), missing_rate=0.0)
    cfg = DpmConfig(n_classes=4, iterations=30, burn_in=10, n_imputations=3)
    result = dpm_multiple_impute(ds, cfg, np.random.default_rng(14))
    assert all(out == ds for out in result.datasets)


def test_fixed_seed_bit_identical():
    ds = random_dataset(np.random.default_rng(15), n=50, missing_rate=0.3)
    cfg = DpmConfig(n_classes=4, iterations=40, burn_in=10, n_imputations=3)
    a = dpm_multiple_impute(ds, cfg, np.random.default_rng(77))
    b = dpm_multiple_impute(ds, cfg, np.random.default_rng(77))
    for x, y in zip(a.datasets, b.datasets):
        assert np.array_equal(x.cells, y.cells)
    assert np.array_equal(a.occupancy, b.occupancy)
    assert np.array_equal(a.alpha_trace, b.alpha_trace)


def test_saturation_flag_raised_when_occupancy_hits_truncation():
    ds = random_dataset(np.random.default_rng(16), n=200, missing_rate=0.2)
    cfg = DpmConfig(n_classes=2, iterations=60, burn_in=10, n_imputations=2)
    result = dpm_multiple_impute(ds, cfg, np.random.default_rng(17))
    assert result.saturated == bool((result.occupancy >= 2).any())
    assert result.saturated  # K=2 on noisy data saturates quickly


def test_alpha_trace_positive():
    ds = random_dataset(np.random.default_rng(18), n=60, missing_rate=0.2)
    cfg = DpmConfig(n_classes=5, iterations=50, burn_in=10, n_imputations=2)
    result = dpm_multiple_impute(ds, cfg, np.random.default_rng(19))
    assert (result.alpha_trace > 0).all()


def test_log_joint_trace_optional():
    ds = random_dataset(np.random.default_rng(20), n=40, missing_rate=0.2)
    cfg = DpmConfig(n_classes=3, iterations=20, burn_in=5, n_imputations=2)
    plain = dpm_multiple_impute(ds, cfg, np.random.default_rng(21))
    traced = dpm_multiple_impute(ds, cfg, np.random.default_rng(21),
                                 track_log_joint=True)
    assert plain.log_joint_trace is None
    assert traced.log_joint_trace is not None
    assert np.isfinite(traced.log_joint_trace).all()
