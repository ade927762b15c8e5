"""Combining rules for multiply imputed estimates (Rubin's rules).

Given L completed-data pairs (q_l, u_l), the pooled point estimate is the
mean of the q_l, the total variance is T = (1 + 1/L) b + u_bar with b the
sample variance of the q_l and u_bar the mean within variance, and the 95%
interval uses a t reference with
dof = (L - 1) (1 + u_bar / ((1 + 1/L) b))^2.

When every q_l agrees (b = 0) the dof formula breaks down; we fall back to a
normal interval with variance u_bar and raise the ``degenerate_between``
flag so downstream consumers can count these cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

# beyond this the t quantile is normal to ~1e-15; also dodges ppf trouble at
# astronomically large dof
_DOF_CAP = 1e15


@dataclass(frozen=True)
class PooledEstimate:
    estimate: float
    between_var: float
    within_var: float
    total_var: float
    dof: float  # inf on the degenerate branch
    ci_low: float
    ci_high: float
    degenerate_between: bool


def pool_arrays(q: np.ndarray, u: np.ndarray, level: float = 0.95) -> dict:
    """Vectorized pooling of L-by-E estimate matrices; returns column arrays."""
    q = np.asarray(q, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if q.ndim != 2 or q.shape != u.shape:
        raise ValueError("q and u must be matching (L, E) matrices")
    n_imp = q.shape[0]
    if n_imp < 2:
        raise ValueError("pooling needs at least 2 completed-data estimates")
    if not 0.0 < level < 1.0:
        raise ValueError("confidence level must be inside (0, 1)")
    # identical q_l must hit the degenerate branch exactly; the float mean of
    # L identical values can otherwise drift by an ulp and leave b > 0
    identical = (q == q[0:1]).all(axis=0)
    center = np.where(identical, q[0], q.mean(axis=0))
    between = np.where(identical, 0.0, q.var(axis=0, ddof=1))
    within = u.mean(axis=0)
    inflate = 1.0 + 1.0 / n_imp
    degenerate = between == 0.0
    total = np.where(degenerate, within, inflate * between + within)
    with np.errstate(divide="ignore", invalid="ignore"):
        dof = np.where(
            degenerate,
            np.inf,
            (n_imp - 1) * (1.0 + within / (inflate * between)) ** 2,
        )
    prob = 0.5 + level / 2.0
    quant = np.where(
        degenerate,
        stats.norm.ppf(prob),
        stats.t.ppf(prob, np.minimum(dof, _DOF_CAP)),
    )
    half = quant * np.sqrt(total)
    return {
        "estimate": center,
        "between_var": between,
        "within_var": within,
        "total_var": total,
        "dof": dof,
        "ci_low": center - half,
        "ci_high": center + half,
        "degenerate_between": degenerate,
    }


def pool(estimates, level: float = 0.95) -> PooledEstimate:
    """Pool a list of (q_l, u_l) pairs from L completed datasets."""
    pairs = list(estimates)
    if len(pairs) < 2:
        raise ValueError("pooling needs at least 2 completed-data estimates")
    q = np.array([[p[0]] for p in pairs])
    u = np.array([[p[1]] for p in pairs])
    cols = pool_arrays(q, u, level=level)
    return PooledEstimate(
        estimate=float(cols["estimate"][0]),
        between_var=float(cols["between_var"][0]),
        within_var=float(cols["within_var"][0]),
        total_var=float(cols["total_var"][0]),
        dof=float(cols["dof"][0]),
        ci_low=float(cols["ci_low"][0]),
        ci_high=float(cols["ci_high"][0]),
        degenerate_between=bool(cols["degenerate_between"][0]),
    )


def covers(pe: PooledEstimate, truth: float) -> bool:
    """Closed-interval containment of the population value."""
    return pe.ci_low <= truth <= pe.ci_high
