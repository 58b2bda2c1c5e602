"""Stage-1 residual pipeline for areal count panels.

Fits a covariate-only Poisson log-linear model under independence (IRLS
with the expected counts as offset, pooling every unit-period
observation), forms log-scale residuals ln(Y/e) - x'beta, and averages
them over time into the per-unit surface that drives the neighbourhood
search. Zero counts get a +0.5 continuity correction inside the log.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import NumericalError, ValidationError

__all__ = [
    "CountPanel",
    "GlmFit",
    "fit_poisson_glm",
    "raw_residuals",
    "fitted_fixed_effects",
    "temporal_average",
]


@dataclass(frozen=True)
class CountPanel:
    """Counts, expected counts, and covariates over K units x N periods.

    counts: (K, N) nonnegative integers; expected: (K, N) positive reals;
    covariates: (K, N, p) reals.
    """

    counts: np.ndarray
    expected: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.counts)
        e = np.asarray(self.expected)
        x = np.asarray(self.covariates)
        if y.ndim != 2 or e.shape != y.shape:
            raise ValidationError("counts and expected must both be (K, N)")
        if x.ndim != 3 or x.shape[:2] != y.shape:
            raise ValidationError("covariates must be (K, N, p)")
        if not np.issubdtype(y.dtype, np.integer):
            raise ValidationError("counts must be integers")
        if (y < 0).any():
            raise ValidationError("counts must be nonnegative")
        if not (e > 0).all():
            raise ValidationError("expected counts must be positive")
        object.__setattr__(self, "counts", y)
        object.__setattr__(self, "expected", np.asarray(e, dtype=np.float64))
        object.__setattr__(self, "covariates", np.asarray(x, dtype=np.float64))

    @property
    def n_units(self) -> int:
        return self.counts.shape[0]

    @property
    def n_periods(self) -> int:
        return self.counts.shape[1]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[2]


@dataclass(frozen=True)
class GlmFit:
    beta: np.ndarray
    converged: bool
    iterations: int
    deviance: float
    with_intercept: bool


def _design(panel: CountPanel, with_intercept: bool) -> np.ndarray:
    n_obs = panel.n_units * panel.n_periods
    x = panel.covariates.reshape(n_obs, panel.n_covariates)
    if with_intercept:
        return np.hstack([np.ones((n_obs, 1)), x])
    if panel.n_covariates == 0:
        raise ValidationError("model needs an intercept or at least one covariate")
    return x


def _poisson_loglik(y: np.ndarray, eta: np.ndarray) -> float:
    return float(np.sum(y * eta - np.exp(eta) - gammaln(y + 1.0)))


def fit_poisson_glm(
    panel: CountPanel,
    add_intercept: bool = True,
    max_iter: int = 100,
    score_tol: float = 1e-8,
    loglik_tol: float = 1e-10,
) -> GlmFit:
    """Poisson log-link regression of counts on covariates with offset ln(e).

    All K*N observations are pooled and treated as independent. Converges
    when the largest score component falls below score_tol or the relative
    log-likelihood change falls below loglik_tol.
    """
    x = _design(panel, add_intercept)
    y = panel.counts.reshape(-1).astype(np.float64)
    offset = np.log(panel.expected.reshape(-1))
    n, p = x.shape
    if np.linalg.matrix_rank(x) < p:
        raise ValidationError("design matrix is rank deficient")

    beta = np.zeros(p)
    if add_intercept:
        beta[0] = np.log(y.sum() / panel.expected.sum())
    eta = x @ beta + offset
    loglik = _poisson_loglik(y, eta)
    for it in range(1, max_iter + 1):
        mu = np.exp(eta)
        score = x.T @ (y - mu)
        if np.max(np.abs(score)) < score_tol:
            return GlmFit(beta, True, it, _deviance(y, mu), add_intercept)
        sqw = np.sqrt(mu)
        z = eta - offset + (y - mu) / mu
        beta, *_ = np.linalg.lstsq(sqw[:, None] * x, sqw * z, rcond=None)
        eta = x @ beta + offset
        new_loglik = _poisson_loglik(y, eta)
        if abs(new_loglik - loglik) < loglik_tol * (abs(loglik) + 1.0):
            mu = np.exp(eta)
            return GlmFit(beta, True, it, _deviance(y, mu), add_intercept)
        loglik = new_loglik
    raise NumericalError(f"IRLS did not converge within {max_iter} iterations")


def _deviance(y: np.ndarray, mu: np.ndarray) -> float:
    term = np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0) / mu), 0.0)
    return float(2.0 * np.sum(term - (y - mu)))


def raw_residuals(panel: CountPanel, fit: GlmFit) -> np.ndarray:
    """(K, N) log-scale residuals ln(Y/e) - x'beta, zero counts corrected to Y+0.5."""
    if not fit.converged:
        raise ValidationError("residuals require a converged fit")
    x = _design(panel, fit.with_intercept)
    fixed = (x @ fit.beta).reshape(panel.counts.shape)
    y = panel.counts.astype(np.float64)
    y_corr = np.where(panel.counts == 0, y + 0.5, y)
    return np.log(y_corr / panel.expected) - fixed


def fitted_fixed_effects(panel: CountPanel, fit: GlmFit) -> np.ndarray:
    """(K, N) linear predictor x'beta excluding the offset."""
    x = _design(panel, fit.with_intercept)
    return (x @ fit.beta).reshape(panel.counts.shape)


def temporal_average(resid: np.ndarray) -> np.ndarray:
    """Average a (K, N) residual matrix over periods into a length-K surface."""
    resid = np.asarray(resid, dtype=np.float64)
    if resid.ndim != 2 or resid.shape[1] < 1:
        raise ValidationError("residual matrix must be (K, N) with N >= 1")
    return resid.mean(axis=1)
