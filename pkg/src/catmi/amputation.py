"""Introduce missingness into fully observed data under MCAR or anchored MAR.

Amputation only flips the missingness mask; cell codes are left in place, so
simulation harnesses can still reach the pre-amputation truth in memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import CategoricalDataset


@dataclass(frozen=True)
class Anchor:
    """A fully observed variable whose level drives the blanking rate."""

    variable: int
    level_rates: tuple[float, ...]


@dataclass(frozen=True)
class MissingnessSpec:
    """MCAR with one rate per cell, or MAR driven by anchor variables.

    Under MAR each anchor contributes an independent Bernoulli per cell with
    the rate attached to the row's anchor level; a cell goes missing when any
    anchor's Bernoulli fires.  Anchor variables must be exempt and stay fully
    observed.
    """

    mechanism: str  # "mcar" | "mar"
    rate: float | None = None
    anchors: tuple[Anchor, ...] = ()
    exempt: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.mechanism not in ("mcar", "mar"):
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        object.__setattr__(self, "exempt", frozenset(self.exempt))
        object.__setattr__(
            self,
            "anchors",
            tuple(Anchor(a.variable, tuple(a.level_rates)) for a in self.anchors),
        )
        if self.mechanism == "mcar":
            if self.rate is None or not 0.0 <= self.rate <= 1.0:
                raise ValueError("mcar needs a rate in [0, 1]")
            if self.anchors:
                raise ValueError("mcar takes no anchors")
        else:
            if not self.anchors:
                raise ValueError("mar needs at least one anchor")
            if self.rate is not None:
                raise ValueError("mar takes per-level rates, not a global rate")
            for a in self.anchors:
                if any(not 0.0 <= r <= 1.0 for r in a.level_rates):
                    raise ValueError("anchor rates must lie in [0, 1]")
                if a.variable not in self.exempt:
                    raise ValueError(
                        f"anchor variable {a.variable} must be in the exempt set"
                    )

    def validate_against(self, data: CategoricalDataset) -> None:
        p = data.p
        bad = [v for v in self.exempt if not 0 <= v < p]
        if bad:
            raise ValueError(f"exempt variables {bad} outside the codebook")
        for a in self.anchors:
            if not 0 <= a.variable < p:
                raise ValueError(f"anchor variable {a.variable} outside the codebook")
            d = len(data.codebook.variables[a.variable].levels)
            if len(a.level_rates) != d:
                raise ValueError(
                    f"anchor {a.variable} lists {len(a.level_rates)} rates "
                    f"for a {d}-level variable"
                )


def ampute(data: CategoricalDataset, spec: MissingnessSpec,
           rng: np.random.Generator) -> CategoricalDataset:
    """Blank cells of a fully observed dataset; bit-reproducible per seed."""
    if not data.fully_observed:
        raise ValueError("ampute expects fully observed data")
    spec.validate_against(data)
    n, p = data.n, data.p
    if spec.mechanism == "mcar":
        missing = rng.random((n, p)) < spec.rate
    else:
        missing = np.zeros((n, p), dtype=bool)
        for a in spec.anchors:
            prob = np.asarray(a.level_rates)[data.cells[:, a.variable]]
            missing |= rng.random((n, p)) < prob[:, None]
    for v in spec.exempt:
        missing[:, v] = False
    return data.replace(missing=missing)


def expected_missing_rate(data: CategoricalDataset, spec: MissingnessSpec) -> float:
    """Expected fraction of missing cells among non-exempt variables."""
    spec.validate_against(data)
    if spec.mechanism == "mcar":
        return float(spec.rate)
    keep = np.ones(data.n)
    for a in spec.anchors:
        prob = np.asarray(a.level_rates)[data.cells[:, a.variable]]
        keep *= 1.0 - prob
    return float(np.mean(1.0 - keep))
