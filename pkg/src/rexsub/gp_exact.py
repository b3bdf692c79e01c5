"""Dense Gaussian-process likelihood and kriging.

These are the reference computations the Vecchia engine is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtri

from .covariance import CovarianceParams, cholesky_jitter, cov_matrix, cross_cov
from .spatial import as_locations

LOG_2PI = math.log(2.0 * math.pi)
#: computed variances above this negative value are treated as roundoff
VARIANCE_CLAMP = -1e-10


@dataclass(frozen=True)
class GPData:
    """Observations ``z`` at ``locations``; ``mean_offset`` is subtracted before modelling."""

    locations: np.ndarray
    z: np.ndarray
    mean_offset: float = 0.0

    def __post_init__(self):
        S = as_locations(self.locations)
        z = np.asarray(self.z, dtype=float).reshape(-1)
        if len(z) != len(S):
            raise ValueError("locations and responses differ in length")
        if not np.all(np.isfinite(z)):
            raise ValueError("responses must be finite")
        object.__setattr__(self, "locations", S)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "mean_offset", float(self.mean_offset))

    @classmethod
    def centered(cls, locations, z):
        z = np.asarray(z, dtype=float)
        return cls(locations, z, float(z.mean()))

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def residuals(self) -> np.ndarray:
        return self.z - self.mean_offset


@dataclass(frozen=True)
class Prediction:
    """Predictive means and variances (arrays, one entry per prediction site)."""

    mean: np.ndarray
    variance: np.ndarray


def clamp_variance(var):
    var = np.asarray(var, dtype=float)
    if np.any(var < VARIANCE_CLAMP):
        raise ValueError(f"negative predictive variance {var.min():.3e}")
    return np.maximum(var, 0.0)


def exact_loglik(data: GPData, params: CovarianceParams) -> float:
    """Gaussian log-density of the centred responses under the full covariance."""
    K = cov_matrix(data.locations, params)
    L = cholesky_jitter(K, params.total_variance)
    w = solve_triangular(L, data.residuals, lower=True)
    return float(-0.5 * w @ w - np.log(np.diag(L)).sum() - 0.5 * data.n * LOG_2PI)


def krige(data: GPData, params: CovarianceParams, s0) -> Prediction:
    """Simple kriging at the rows of ``s0`` given the observations in ``data``."""
    S0 = as_locations(s0)
    K = cov_matrix(data.locations, params)
    L = cholesky_jitter(K, params.total_variance)
    k = cross_cov(data.locations, S0, params)  # (n, n0)
    alpha = cho_solve((L, True), data.residuals)
    mean = data.mean_offset + k.T @ alpha
    v = solve_triangular(L, k, lower=True)
    var = params.total_variance - np.einsum("ij,ij->j", v, v)
    return Prediction(mean, clamp_variance(var))


def normal_quantile(p):
    """Standard normal quantile function."""
    return ndtri(p)


def prediction_interval(pred: Prediction, alpha: float):
    """Equal-tailed ``100(1 - alpha)%`` normal prediction interval ``(lower, upper)``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    var = np.asarray(pred.variance, dtype=float)
    if np.any(var < 0):
        raise ValueError("variance must be nonnegative")
    q = normal_quantile(1.0 - alpha / 2.0)
    half = q * np.sqrt(var)
    mean = np.asarray(pred.mean, dtype=float)
    return mean - half, mean + half
