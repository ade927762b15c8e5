"""Multinomial logistic conditional engine: IRLS fit, posterior draw, imputation.

Binary targets ride the same multinomial code path with two classes.  The
first level of the target is the reference outcome and predictors are
dummy-coded with their first level as reference.  A ridge penalty on every
non-intercept coefficient keeps separated or sparse fits bounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chained import ConditionalEngine


class EngineUnsupported(Exception):
    """The conditional model cannot be fit for this variable by design limits."""

    def __init__(self, variable: str, n_levels: int, max_levels: int):
        self.variable = variable
        self.n_levels = n_levels
        self.max_levels = max_levels
        super().__init__(
            f"variable {variable!r} has {n_levels} levels, above the "
            f"supported maximum of {max_levels} for multinomial fitting"
        )


class FitNotConverged(RuntimeError):
    """IRLS did not converge within the iteration cap; carries the trace."""

    def __init__(self, variable: str, trace: list):
        self.variable = variable
        self.trace = trace
        super().__init__(
            f"multinomial fit for {variable!r} did not converge in "
            f"{len(trace)} iterations (last max step {trace[-1][1]:.3e})"
        )


@dataclass
class LogisticFit:
    """Penalized-likelihood estimate for one multinomial conditional model."""

    coefficients: np.ndarray  # (n_classes - 1, n_features) log odds vs level 0
    covariance: np.ndarray    # inverse penalized observed information, flattened order
    ridge: float
    n_classes: int
    pred_n_levels: np.ndarray
    target_name: str = ""


def dummy_encode(codes: np.ndarray, n_levels: np.ndarray) -> np.ndarray:
    """Intercept plus first-level-reference indicator columns."""
    n, q = codes.shape
    width = 1 + int(np.sum(n_levels - 1))
    x = np.zeros((n, width))
    x[:, 0] = 1.0
    offset = 1
    for j in range(q):
        hot = codes[:, j] > 0
        x[np.flatnonzero(hot), offset + codes[hot, j] - 1] = 1.0
        offset += int(n_levels[j]) - 1
    return x


def softmax_probs(x: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """Class probabilities (n, n_classes) with the reference class first."""
    eta = x @ coef.T
    peak = np.maximum(eta.max(axis=1), 0.0) if eta.shape[1] else np.zeros(len(x))
    ex = np.exp(eta - peak[:, None])
    base = np.exp(-peak)
    denom = base + ex.sum(axis=1)
    return np.concatenate([(base / denom)[:, None], ex / denom[:, None]], axis=1)


def _penalty_mask(n_classes: int, width: int) -> np.ndarray:
    mask = np.ones((n_classes - 1, width))
    mask[:, 0] = 0.0  # intercepts stay unpenalized
    return mask


def penalized_loglik(coef, x, y, ridge) -> float:
    """Log likelihood minus the ridge penalty on non-intercept coefficients."""
    probs = softmax_probs(x, coef)
    ll = float(np.sum(np.log(np.maximum(probs[np.arange(len(y)), y], 1e-300))))
    mask = _penalty_mask(coef.shape[0] + 1, coef.shape[1])
    return ll - 0.5 * ridge * float(np.sum((coef * mask) ** 2))


def penalized_gradient(coef, x, y, ridge) -> np.ndarray:
    """Gradient of the penalized log likelihood, shape (n_classes-1, width)."""
    probs = softmax_probs(x, coef)
    n_classes = coef.shape[0] + 1
    onehot = np.zeros((len(y), n_classes - 1))
    pos = y > 0
    onehot[np.flatnonzero(pos), y[pos] - 1] = 1.0
    grad = (onehot - probs[:, 1:]).T @ x
    mask = _penalty_mask(n_classes, coef.shape[1])
    return grad - ridge * coef * mask


def _observed_information(coef, x, ridge) -> np.ndarray:
    """Penalized negative hessian, (m, m) with m = (n_classes-1) * width."""
    probs = softmax_probs(x, coef)[:, 1:]
    c1, width = coef.shape
    m = c1 * width
    info = np.empty((m, m))
    for a in range(c1):
        for b in range(a, c1):
            w = probs[:, a] * ((1.0 if a == b else 0.0) - probs[:, b])
            block = (x * w[:, None]).T @ x
            info[a * width:(a + 1) * width, b * width:(b + 1) * width] = block
            if a != b:
                info[b * width:(b + 1) * width, a * width:(a + 1) * width] = block
    mask = _penalty_mask(c1 + 1, width).ravel()
    info[np.arange(m), np.arange(m)] += ridge * mask
    return info


def fit_multinomial(y, predictors, pred_n_levels, n_classes, *, ridge=1e-5,
                    max_levels=10, max_iter=25, tol=1e-8,
                    target_name="") -> LogisticFit:
    """Penalized maximum likelihood by full-Newton IRLS with step halving.

    Raises EngineUnsupported when the target's declared level count exceeds
    ``max_levels`` and FitNotConverged when the iteration cap runs out.
    """
    if n_classes > max_levels:
        raise EngineUnsupported(target_name, n_classes, max_levels)
    y = np.asarray(y, dtype=np.int64)
    if np.unique(y).size < 2:
        raise ValueError("fit_multinomial needs at least 2 observed target levels")
    pred_n_levels = np.asarray(pred_n_levels, dtype=np.int64)
    x = dummy_encode(np.asarray(predictors, dtype=np.int32), pred_n_levels)
    width = x.shape[1]
    coef = np.zeros((n_classes - 1, width))
    ll = penalized_loglik(coef, x, y, ridge)
    trace = []
    converged = False
    for _ in range(max_iter):
        grad = penalized_gradient(coef, x, y, ridge)
        info = _observed_information(coef, x, ridge)
        try:
            step = np.linalg.solve(info, grad.ravel()).reshape(coef.shape)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, grad.ravel(), rcond=None)[0].reshape(coef.shape)
        scale = 1.0
        for _half in range(5):
            cand = coef + scale * step
            ll_cand = penalized_loglik(cand, x, y, ridge)
            if ll_cand >= ll - 1e-9:
                break
            scale *= 0.5
        max_delta = float(np.max(np.abs(scale * step)))
        trace.append((len(trace) + 1, max_delta, ll_cand))
        if ll_cand >= ll - 1e-9:
            coef = cand
            ll = ll_cand
        if max_delta < tol:
            converged = True
            break
    if not converged:
        raise FitNotConverged(target_name, trace)
    return LogisticFit(
        coefficients=coef,
        covariance=np.linalg.inv(_observed_information(coef, x, ridge)),
        ridge=ridge,
        n_classes=n_classes,
        pred_n_levels=pred_n_levels,
        target_name=target_name,
    )


def draw_coefficients(fit: LogisticFit, rng: np.random.Generator) -> np.ndarray:
    """One normal approximate-posterior draw of the coefficient matrix."""
    cov = (fit.covariance + fit.covariance.T) / 2.0
    m = cov.shape[0]
    scale = float(np.trace(cov)) / m
    if scale == 0.0:
        # no parameter uncertainty: the draw is the estimate itself
        return fit.coefficients.copy()
    jitter = 0.0
    for _ in range(4):
        try:
            chol = np.linalg.cholesky(cov + jitter * np.eye(m))
            break
        except np.linalg.LinAlgError:
            jitter = max(jitter * 10.0, 1e-12 * scale)
    else:
        raise np.linalg.LinAlgError("coefficient covariance is not positive definite")
    flat = fit.coefficients.ravel() + chol @ rng.standard_normal(m)
    return flat.reshape(fit.coefficients.shape)


def draw_and_impute(fit: LogisticFit, rows: np.ndarray,
                    rng: np.random.Generator) -> np.ndarray:
    """Sample imputed target codes for predictor rows under one coefficient draw."""
    coef = draw_coefficients(fit, rng)
    x = dummy_encode(np.asarray(rows, dtype=np.int32), fit.pred_n_levels)
    probs = softmax_probs(x, coef)
    cum = np.cumsum(probs, axis=1)
    t = rng.random(len(x)) * cum[:, -1]
    pick = (cum <= t[:, None]).sum(axis=1)
    return np.minimum(pick, fit.n_classes - 1).astype(np.int32)


class GlmEngine(ConditionalEngine):
    """Conditional engine: multinomial logistic fit plus coefficient-draw imputation.

    Target levels absent from the fitting rows are compacted away before the
    fit (their intercepts would diverge), so imputations can only take levels
    actually observed for the variable.
    """

    def __init__(self, ridge=1e-5, max_levels=10, max_iter=25, tol=1e-8):
        self.ridge = ridge
        self.max_levels = max_levels
        self.max_iter = max_iter
        self.tol = tol

    def fit_and_draw(self, target, observed, predictors, pred_n_levels,
                     n_classes, rng, target_name=""):
        if n_classes > self.max_levels:
            raise EngineUnsupported(target_name, n_classes, self.max_levels)
        y_obs = np.asarray(target[observed], dtype=np.int64)
        need = predictors[~observed]
        present = np.unique(y_obs)
        if present.size == 1:
            return np.full(len(need), present[0], dtype=np.int32)
        compact = np.searchsorted(present, y_obs)
        fit = fit_multinomial(
            compact, predictors[observed], pred_n_levels, int(present.size),
            ridge=self.ridge, max_levels=self.max_levels,
            max_iter=self.max_iter, tol=self.tol, target_name=target_name,
        )
        drawn = draw_and_impute(fit, need, rng)
        return present[drawn].astype(np.int32)
