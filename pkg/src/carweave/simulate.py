"""Synthetic spatio-temporal count panels with known latent truth.

The geography is a regular unit-spaced lattice with rook adjacency.
Counts follow a Poisson model whose log risk is the sum of two covariate
effects, a per-period spatial surface, and an AR(1) trend. The spatial
surface is a common draw (whose mean carries the step-change bands) plus
smaller per-period deviations, both with exponential-in-distance
correlation whose range parameter is calibrated so the mean pairwise
correlation hits a target. One covariate is independent noise, the other
shares the exponential correlation structure and is redrawn each period.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .residuals import CountPanel

__all__ = [
    "SimulationConfig",
    "SimulatedPanel",
    "lattice_centroids",
    "exponential_correlation",
    "calibrate_range",
    "sample_mvn",
    "step_change_mean",
    "ar1_series",
    "replicate_stream",
    "simulate_panel",
]


@dataclass(frozen=True)
class SimulationConfig:
    rows: int
    cols: int
    n_periods: int
    beta: tuple[float, ...] = (0.05, 0.05)
    e_range: tuple[float, float] = (10.0, 30.0)
    step_size: float = 0.0
    ar_coef: float = 0.8
    cov_target_corr: float = 0.25
    phi_target_corr: float = 0.15
    cov_sd: float = 0.5
    phi_sd: float = 0.2
    phi_star_sd: float = 0.1
    trend_sd: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.n_periods < 1:
            raise ValidationError("rows, cols and n_periods must be >= 1")
        if len(self.beta) != 2:
            raise ValidationError("beta must have two components")
        if not 0.0 <= self.ar_coef < 1.0:
            raise ValidationError("ar_coef must lie in [0, 1)")
        if not (0.0 < self.e_range[0] <= self.e_range[1]):
            raise ValidationError("e_range must be positive and ordered")
        for name in ("cov_sd", "phi_sd", "phi_star_sd", "trend_sd"):
            if not getattr(self, name) > 0.0:
                raise ValidationError(f"{name} must be positive")
        for name in ("cov_target_corr", "phi_target_corr"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValidationError(f"{name} must lie in (0, 1)")
        if self.step_size < 0.0:
            raise ValidationError("step_size must be >= 0")

    @property
    def n_units(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class SimulatedPanel:
    """A CountPanel plus the latent truth it was generated from."""

    panel: CountPanel
    latent_surfaces: np.ndarray  # (K, N) per-period spatial effects
    trend: np.ndarray  # (N,) AR(1) trend
    risk: np.ndarray  # (K, N) true relative risks
    region_label: np.ndarray  # (K,) values in {-1, 0, +1}
    centroids: np.ndarray  # (K, 2)
    cov_range_param: float
    surface_range_param: float


def lattice_centroids(rows: int, cols: int) -> np.ndarray:
    """(K, 2) unit-spaced centroids; vertex index is row*cols + col."""
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    return np.column_stack([cc.reshape(-1), rr.reshape(-1)]).astype(np.float64)


def _distance_matrix(centroids: np.ndarray) -> np.ndarray:
    diff = centroids[:, None, :] - centroids[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def exponential_correlation(distances: np.ndarray, range_param: float) -> np.ndarray:
    """Correlation matrix exp(-range_param * D) for a distance matrix D."""
    d = np.asarray(distances, dtype=np.float64)
    if range_param < 0.0:
        raise ValidationError("range_param must be >= 0")
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValidationError("distance matrix must be square")
    if not np.allclose(d, d.T):
        raise ValidationError("distance matrix must be symmetric")
    if (d < 0).any() or not np.allclose(np.diag(d), 0.0):
        raise ValidationError("distances must be nonnegative with zero diagonal")
    return np.exp(-range_param * d)


def _mean_offdiag(corr: np.ndarray) -> float:
    k = corr.shape[0]
    return float((corr.sum() - k) / (k * (k - 1)))


def calibrate_range(distances: np.ndarray, target: float) -> float:
    """Range parameter whose mean off-diagonal correlation matches target.

    Bisection on [0, hi] with hi doubled until it brackets; the mean
    correlation is monotone decreasing in the range parameter.
    """
    d = np.asarray(distances, dtype=np.float64)
    if not 0.0 < target < 1.0:
        raise ValidationError("target must lie in (0, 1)")
    off = d[~np.eye(d.shape[0], dtype=bool)]
    if off.size == 0 or not (off > 0).any():
        raise ValidationError("need at least one positive off-diagonal distance")

    def mean_corr(xi: float) -> float:
        return _mean_offdiag(exponential_correlation(d, xi))

    hi = 1.0
    while mean_corr(hi) > target:
        hi *= 2.0
        if hi > 1e12:
            raise NumericalError("failed to bracket the range parameter")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = mean_corr(mid)
        if abs(val - target) < 1e-10:
            return mid
        if val > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _cholesky_psd(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    jittered = cov + 1e-10 * np.eye(cov.shape[0])
    try:
        return np.linalg.cholesky(jittered)
    except np.linalg.LinAlgError:
        raise NumericalError("covariance not positive-definite after jitter") from None


def sample_mvn(mean: np.ndarray, cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One multivariate normal draw via Cholesky; deterministic given rng state."""
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (mean.size, mean.size):
        raise ValidationError("covariance shape does not match mean length")
    chol = _cholesky_psd(cov)
    return mean + chol @ rng.standard_normal(mean.size)


def step_change_mean(rows: int, cols: int, step_size: float) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-constant surface mean over three vertical bands.

    Columns split as evenly as possible (leftmost bands take the
    remainder); bands carry levels -step_size, 0, +step_size left to right.
    Returns (mean vector, band labels in {-1, 0, +1}), both length K.
    """
    if step_size < 0.0:
        raise ValidationError("step_size must be >= 0")
    base, rem = divmod(cols, 3)
    widths = [base + (1 if i < rem else 0) for i in range(3)]
    col_label = np.repeat([-1, 0, 1], widths)
    labels = np.tile(col_label, rows)
    return labels * step_size, labels


def ar1_series(n: int, coef: float, marginal_sd: float, rng: np.random.Generator) -> np.ndarray:
    """Stationary AR(1) path of length n with the given marginal sd."""
    if not 0.0 <= coef < 1.0:
        raise ValidationError("coef must lie in [0, 1)")
    out = np.empty(n)
    out[0] = rng.normal(0.0, marginal_sd)
    innov_sd = marginal_sd * np.sqrt(1.0 - coef * coef)
    for t in range(1, n):
        out[t] = coef * out[t - 1] + rng.normal(0.0, innov_sd)
    return out


def replicate_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for replicate `index`; order-independent across replicates."""
    return np.random.default_rng([seed, index])


def simulate_panel(cfg: SimulationConfig, rng: np.random.Generator | None = None) -> SimulatedPanel:
    """Generate one panel with its latent truth.

    Draw order is fixed: expected counts, independent covariate,
    correlated covariate per period, common surface, per-period surface
    deviations, trend, counts.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    k = cfg.n_units
    n = cfg.n_periods
    centroids = lattice_centroids(cfg.rows, cfg.cols)
    dist = _distance_matrix(centroids)
    xi_cov = calibrate_range(dist, cfg.cov_target_corr)
    xi_phi = calibrate_range(dist, cfg.phi_target_corr)
    chol_cov = _cholesky_psd(exponential_correlation(dist, xi_cov))
    chol_phi = _cholesky_psd(exponential_correlation(dist, xi_phi))

    expected = rng.uniform(cfg.e_range[0], cfg.e_range[1], size=(k, n))
    x1 = rng.normal(0.0, cfg.cov_sd, size=(k, n))
    x2 = np.empty((k, n))
    for t in range(n):
        x2[:, t] = cfg.cov_sd * (chol_cov @ rng.standard_normal(k))

    mean_surface, labels = step_change_mean(cfg.rows, cfg.cols, cfg.step_size)
    common = mean_surface + cfg.phi_sd * (chol_phi @ rng.standard_normal(k))
    surfaces = np.empty((k, n))
    for t in range(n):
        surfaces[:, t] = common + cfg.phi_star_sd * (chol_phi @ rng.standard_normal(k))

    trend = ar1_series(n, cfg.ar_coef, cfg.trend_sd, rng)

    covariates = np.stack([x1, x2], axis=2)
    log_risk = cfg.beta[0] * x1 + cfg.beta[1] * x2 + surfaces + trend[None, :]
    risk = np.exp(log_risk)
    counts = rng.poisson(expected * risk)

    panel = CountPanel(counts=counts, expected=expected, covariates=covariates)
    return SimulatedPanel(
        panel=panel,
        latent_surfaces=surfaces,
        trend=trend,
        risk=risk,
        region_label=labels,
        centroids=centroids,
        cov_range_param=xi_cov,
        surface_range_param=xi_phi,
    )
