"""Truncated stick-breaking mixture of multinomials with in-sampler imputation.

The joint model: each row belongs to one of K latent classes; within a class
every variable is an independent multinomial.  Class weights follow a
truncated stick-breaking construction with Beta(1, alpha) sticks and a
Gamma(0.25, 0.25) hyperprior on the concentration (rate parameterization).
Level probabilities carry flat Dirichlet priors.

One blocked Gibbs sweep, in fixed order:

  (a) latent class per row, observed cells only (missing marginalized out),
  (b) missing cells redrawn from the row's class-conditional multinomials,
  (c) level probabilities from Dirichlet(1 + completed-data counts),
  (d) sticks from Beta(1 + n_k, alpha + tail count), weights recomputed,
  (e) concentration from its Gamma full conditional.

Row likelihoods are accumulated in log space with a per-row peak shift, so
many variables cannot underflow the class weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .chained import marginal_fill
from .data import CategoricalDataset

_COMP_FLOOR = 1e-300  # keeps log(1 - V) finite when a complement draw underflows


@dataclass
class DpmState:
    """Latent assignments, stick weights, level probabilities, concentration."""

    assignments: np.ndarray   # (n,) int32 class codes
    sticks: np.ndarray        # (K,) stick fractions, last entry fixed at 1
    weights: np.ndarray       # (K,) class weights from the stick construction
    level_probs: np.ndarray   # (K, p, Dmax), rows sum to 1 over each D_j
    concentration: float
    n_levels: np.ndarray      # (p,)
    alpha_shape: float = 0.25
    alpha_rate: float = 0.25

    @property
    def n_classes(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class DpmConfig:
    n_classes: int = 35
    iterations: int = 10000
    burn_in: int = 2000
    n_imputations: int = 10
    alpha_shape: float = 0.25
    alpha_rate: float = 0.25

    def __post_init__(self):
        if self.n_classes < 1:
            raise ValueError("need at least one latent class")
        if self.burn_in < 0 or self.burn_in >= self.iterations:
            raise ValueError("burn_in must be nonnegative and below iterations")
        if self.iterations - self.burn_in < self.n_imputations:
            raise ValueError("post burn-in run too short for the requested imputations")
        if self.n_imputations < 2:
            raise ValueError("need at least 2 imputations")


@dataclass
class DpmResult:
    """Completed datasets plus the diagnostics retained from the run."""

    datasets: list
    occupancy: np.ndarray    # occupied classes per iteration
    alpha_trace: np.ndarray
    saturated: bool          # occupancy hit the truncation level at least once
    capture_iterations: np.ndarray
    log_joint_trace: np.ndarray | None = None


def _weights_from_complements(comp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sticks and weights from the stick complements 1 - V (k < K).

    Working with the complements keeps precision when a stick crowds 1: the
    Beta draw for 1 - V resolves values far below the spacing of floats
    near 1, and the weight products use them directly.
    """
    k = len(comp) + 1
    sticks = np.empty(k)
    sticks[:-1] = 1.0 - comp
    sticks[-1] = 1.0
    weights = np.empty(k)
    weights[0] = sticks[0]
    if k > 1:
        weights[1:] = sticks[1:] * np.cumprod(comp)
    return sticks, weights


def _level_mask(n_levels: np.ndarray, dmax: int) -> np.ndarray:
    return np.arange(dmax)[None, :] < n_levels[:, None]


def init_state(n: int, n_levels: np.ndarray, cfg: DpmConfig,
               rng: np.random.Generator) -> DpmState:
    """Parsimonious start: all rows in the first class with matching sticks.

    The first stick is drawn from its full conditional under that assignment
    (Beta(1 + n, alpha)), the rest from the prior, so occupancy grows only as
    the data demands it.  A diffuse start instead tends to stabilize redundant
    near-duplicate classes by pushing the concentration into its high basin.
    """
    k = cfg.n_classes
    alpha = 1.0
    if k > 1:
        first = rng.beta(alpha, 1.0 + n)  # complement of the loaded first stick
        rest = rng.beta(alpha, 1.0, size=k - 2) if k > 2 else np.empty(0)
        comp = np.maximum(np.append(first, rest), _COMP_FLOOR)
        sticks, weights = _weights_from_complements(comp)
    else:
        sticks = np.ones(1)
        weights = np.ones(1)
    dmax = int(n_levels.max())
    mask = _level_mask(n_levels, dmax)
    gam = rng.standard_gamma(np.ones((k, len(n_levels), dmax)))
    gam = np.where(mask[None], gam, 0.0)
    level_probs = gam / gam.sum(axis=2, keepdims=True)
    z = np.zeros(n, dtype=np.int32)
    return DpmState(
        assignments=z, sticks=sticks, weights=weights, level_probs=level_probs,
        concentration=alpha, n_levels=np.asarray(n_levels, dtype=np.int64),
        alpha_shape=cfg.alpha_shape, alpha_rate=cfg.alpha_rate,
    )


def gibbs_step(state: DpmState, cells: np.ndarray, missing: np.ndarray,
               rng: np.random.Generator) -> DpmState:
    """One full-conditional sweep; mutates ``state`` and the missing cells."""
    n, p = cells.shape
    k = state.n_classes
    n_levels = state.n_levels
    dmax = state.level_probs.shape[2]
    mask = _level_mask(n_levels, dmax)
    logpi = np.log(np.maximum(state.weights, 1e-300))
    loglam = np.where(mask[None], np.log(np.maximum(state.level_probs, 1e-300)), 0.0)
    z = kernels.assign_classes(logpi, loglam, cells, missing, rng.random(n))
    state.assignments = z
    n_missing = int(missing.sum())
    if n_missing:
        kernels.draw_missing(state.level_probs, z, cells, missing, n_levels,
                             rng.random(n_missing))
    counts = kernels.class_level_counts(cells, z, k, n_levels)
    gam = rng.standard_gamma(counts + 1.0)
    gam = np.where(mask[None], gam, 0.0)
    state.level_probs = gam / gam.sum(axis=2, keepdims=True)
    class_sizes = np.bincount(z, minlength=k)
    if k > 1:
        tail = n - np.cumsum(class_sizes)
        # drawn as 1 - V so that sticks crowding 1 keep full log precision
        comp = rng.beta(state.concentration + tail[:-1], 1.0 + class_sizes[:-1])
        comp = np.maximum(comp, _COMP_FLOOR)
        sticks, weights = _weights_from_complements(comp)
        rate = state.alpha_rate - float(np.sum(np.log(comp)))
    else:
        sticks = np.ones(1)
        weights = np.ones(1)
        rate = state.alpha_rate
    state.sticks = sticks
    state.weights = weights
    state.concentration = float(
        rng.gamma(state.alpha_shape + k - 1, 1.0 / rate)
    )
    return state


def occupied_classes(state: DpmState) -> int:
    """Number of latent classes holding at least one row."""
    return int(np.unique(state.assignments).size)


def joint_cell_probability(state: DpmState, cells) -> float:
    """Model probability of a joint cell: sum_k w_k * prod_j P(level | class)."""
    variables = [v for v, _ in cells]
    if len(set(variables)) != len(variables):
        raise ValueError("joint cell variables must be distinct")
    acc = state.weights.copy()
    for var, lev in cells:
        acc = acc * state.level_probs[:, var, lev]
    return float(acc.sum())


def dpm_multiple_impute(data: CategoricalDataset, cfg: DpmConfig,
                        rng: np.random.Generator,
                        track_log_joint: bool = False) -> DpmResult:
    """Run the sampler and capture L completed datasets, evenly spaced.

    Missing cells start from observed-marginal draws.  Captures land at
    burn_in + s*m for m = 1..L with s = floor((iterations - burn_in) / L).
    A run whose occupancy ever reaches the truncation level completes but is
    flagged saturated, advising a larger class count.
    """
    n_levels = data.codebook.n_levels
    cells = data.cells.copy()
    cells.setflags(write=True)
    missing = data.missing
    if missing.any():
        marginal_fill(cells, missing, n_levels, rng, names=data.codebook.names)
    state = init_state(data.n, n_levels, cfg, rng)
    spacing = (cfg.iterations - cfg.burn_in) // cfg.n_imputations
    capture_at = cfg.burn_in + spacing * np.arange(1, cfg.n_imputations + 1)
    capture_set = set(int(c) for c in capture_at)
    occupancy = np.empty(cfg.iterations, dtype=np.int64)
    alpha_trace = np.empty(cfg.iterations)
    log_joint = np.empty(cfg.iterations) if track_log_joint else None
    datasets = []
    for it in range(1, cfg.iterations + 1):
        gibbs_step(state, cells, missing, rng)
        occupancy[it - 1] = occupied_classes(state)
        alpha_trace[it - 1] = state.concentration
        if track_log_joint:
            log_joint[it - 1] = completed_log_joint(state, cells)
        if it in capture_set:
            datasets.append(CategoricalDataset(codebook=data.codebook,
                                               cells=cells.copy()))
    return DpmResult(
        datasets=datasets,
        occupancy=occupancy,
        alpha_trace=alpha_trace,
        saturated=bool((occupancy >= cfg.n_classes).any()),
        capture_iterations=capture_at,
        log_joint_trace=log_joint,
    )


def completed_log_joint(state: DpmState, cells: np.ndarray) -> float:
    """Completed-data log density under the current parameters (diagnostics)."""
    logpi = np.log(np.maximum(state.weights, 1e-300))
    loglam = np.log(np.maximum(state.level_probs, 1e-300))
    z = state.assignments.astype(np.int64)
    total = float(logpi[z].sum())
    for j in range(cells.shape[1]):
        total += float(loglam[z, j, cells[:, j]].sum())
    return total
