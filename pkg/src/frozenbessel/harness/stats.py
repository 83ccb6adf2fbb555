"""Estimators and confidence checks used by the experiments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import UsageError


def empirical_covariance(samples) -> np.ndarray:
    """Unbiased sample covariance of the rows of ``samples``."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise UsageError("need at least two samples")
    d = x - x.mean(axis=0)
    return d.T @ d / (x.shape[0] - 1)


def bonferroni_z(n_tests: int, z_min: float = 4.0, alpha: float = 1e-3) -> float:
    """Two-sided normal quantile for ``n_tests`` comparisons, never below ``z_min``."""
    return max(z_min, float(stats.norm.isf(alpha / (2.0 * n_tests))))


@dataclass(frozen=True)
class BandCheck:
    estimate: np.ndarray
    reference: np.ndarray
    std_error: np.ndarray
    z: float

    @property
    def zscores(self):
        return np.abs(self.estimate - self.reference) / self.std_error

    @property
    def passed(self) -> bool:
        return bool(np.all(self.zscores <= self.z))


def covariance_band(samples, reference, z_min: float = 4.0) -> BandCheck:
    """Element-wise asymptotic normal band for the sample covariance.

    Standard errors use the empirical variance of the centred products, so no
    Gaussianity is assumed; the band width is Bonferroni-corrected over all
    ``N^2`` entries and at least ``z_min`` standard errors.
    """
    x = np.asarray(samples, dtype=float)
    n, dim = x.shape
    d = x - x.mean(axis=0)
    prod = d[:, :, None] * d[:, None, :]
    se = prod.std(axis=0, ddof=1) / np.sqrt(n)
    return BandCheck(empirical_covariance(x), np.asarray(reference, dtype=float), se,
                     bonferroni_z(dim * dim, z_min))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float


def rate_regression(k_values, median_errors, level: float = 0.95) -> RateFit:
    """Least-squares slope of ``log(error)`` against ``log(k)``."""
    k = np.asarray(k_values, dtype=float)
    e = np.asarray(median_errors, dtype=float)
    if k.size != e.size:
        raise UsageError("k_values and median_errors differ in length")
    if k.size < 3:
        raise UsageError("need at least three k values")
    if np.any(k <= 0) or np.any(e <= 0):
        raise UsageError("k values and errors must be positive")
    if k.max() / k.min() < 10.0:
        raise UsageError("k values must span at least one decade")
    res = stats.linregress(np.log(k), np.log(e))
    dof = k.size - 2
    half = float(stats.t.ppf(0.5 + level / 2.0, dof) * res.stderr) if dof > 0 else float("inf")
    return RateFit(float(res.slope), float(res.intercept), float(res.slope - half), float(res.slope + half))


def skewness_with_se(samples):
    """Sample skewness ``g1`` and its standard error under normality."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 3:
        raise UsageError("need at least three samples")
    g1 = float(stats.skew(x))
    se = np.sqrt(6.0 * n * (n - 1) / ((n - 2) * (n + 1) * (n + 3)))
    return g1, float(se)


def mean_with_se(samples):
    x = np.asarray(samples, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


HALF_NORMAL_MEAN = float(np.sqrt(2.0 / np.pi))
