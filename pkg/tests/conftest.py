"""Shared fixtures: deterministic populations reused across test modules."""

from __future__ import annotations

import sys

import numpy as np
from hypothesis import HealthCheck, settings

from catmi.data import CategoricalDataset, Codebook, Variable
from catmi.simulator import MixturePopulationSpec

settings.register_profile(
    "catmi",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("catmi")


def pytest_terminal_summary(terminalreporter):
    """Replay the acceptance pass/fail lines after capture ends."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "GATE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.line(line)


def small_codebook() -> Codebook:
    return Codebook(
        variables=(
            Variable("COLOR", ("red", "green", "blue")),
            Variable("SIZE", ("small", "large")),
            Variable("GRADE", ("low", "mid", "high")),
        )
    )


def random_dataset(rng: np.random.Generator, n=40, missing_rate=0.3,
                   codebook: Codebook | None = None) -> CategoricalDataset:
    cb = codebook or small_codebook()
    levels = cb.n_levels
    cells = np.stack(
        [rng.integers(0, d, size=n) for d in levels], axis=1
    ).astype(np.int32)
    missing = rng.random((n, len(levels))) < missing_rate
    # keep at least one observed value per column so marginals exist
    for j in range(len(levels)):
        if missing[:, j].all():
            missing[rng.integers(0, n), j] = False
    return CategoricalDataset(codebook=cb, cells=cells, missing=missing)


def two_class_recovery_spec(n_rows=5000) -> MixturePopulationSpec:
    """Sharp two-class generator used for the sampler recovery checks."""
    variables = tuple(
        Variable(f"X{j}", ("a", "b", "c", "d")) for j in range(6)
    )
    def profile(top):
        return tuple(0.97 if i == top else 0.01 for i in range(4))
    return MixturePopulationSpec(
        n_rows=n_rows,
        variables=variables,
        weights=(0.6, 0.4),
        class_level_probs=(
            tuple(profile(0) for _ in range(6)),
            tuple(profile(3) for _ in range(6)),
        ),
    )


def desk_study_population() -> MixturePopulationSpec:
    """Three-class household-style mixture for the end-to-end study.

    Classes one and two share the pattern block but flip the correlated
    (CHILDREN, WORKERS) pair, so conditionals for the pair need interactions;
    the third class carries a distinct pattern with the pair anti-aligned.
    """
    variables = (
        Variable("HOUSEHOLD", ("couple", "single_parent")),
        Variable("TENURE", ("own", "rent", "other")),
        Variable("VEHICLES", ("none", "one", "two_plus")),
        Variable("INCOME", ("low", "mid_low", "mid_high", "high")),
        Variable("CHILDREN", ("yes", "no")),
        Variable("WORKERS", ("one_or_none", "two_plus")),
    )
    pattern_p = (
        (0.90, 0.10), (0.85, 0.10, 0.05), (0.08, 0.12, 0.80),
        (0.05, 0.15, 0.30, 0.50),
    )
    pattern_q = (
        (0.15, 0.85), (0.06, 0.14, 0.80), (0.78, 0.14, 0.08),
        (0.60, 0.25, 0.10, 0.05),
    )
    return MixturePopulationSpec(
        n_rows=100_000,
        variables=variables,
        weights=(0.40, 0.35, 0.25),
        class_level_probs=(
            pattern_p + ((0.92, 0.08), (0.92, 0.08)),
            pattern_p + ((0.08, 0.92), (0.08, 0.92)),
            pattern_q + ((0.88, 0.12), (0.12, 0.88)),
        ),
    )
