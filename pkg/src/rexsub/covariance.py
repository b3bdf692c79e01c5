"""Matérn covariance and the effective-range solver."""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy import optimize, special

from .spatial import as_locations, pairwise_distances

#: correlation level that defines the effective range
EFFECTIVE_RANGE_LEVEL = 0.05


@dataclass(frozen=True)
class CovarianceParams:
    """Matérn parameters: smoothness, range, partial sill and nugget."""

    nu: float
    phi: float
    sigma2: float
    tau2: float = 0.0

    def __post_init__(self):
        vals = (self.nu, self.phi, self.sigma2, self.tau2)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite covariance parameters {vals}")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.phi <= 0:
            raise ValueError("phi must be positive")
        if self.sigma2 < 0 or self.tau2 < 0:
            raise ValueError("variances must be nonnegative")
        if self.sigma2 + self.tau2 <= 0:
            raise ValueError("sigma2 + tau2 must be positive")

    @property
    def total_variance(self) -> float:
        return self.sigma2 + self.tau2


def matern_correlation(d, nu: float, phi: float):
    """Unit-sill Matérn correlation at distance(s) ``d``."""
    d = np.asarray(d, dtype=float)
    if nu == 0.5:
        return np.exp(-d / phi)
    if nu == 1.5:
        h = math.sqrt(3.0) * d / phi
        return (1.0 + h) * np.exp(-h)
    if nu == 2.5:
        h = math.sqrt(5.0) * d / phi
        return (1.0 + h + h * h / 3.0) * np.exp(-h)
    return matern_correlation_bessel(d, nu, phi)


def matern_correlation_bessel(d, nu: float, phi: float):
    """General-smoothness Matérn correlation through the modified Bessel function K_nu."""
    d = np.asarray(d, dtype=float)
    h = math.sqrt(2.0 * nu) * d / phi
    out = np.ones_like(h)
    pos = h > 0
    hp = h[pos]
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        # kve(nu, h) = kv(nu, h) * exp(h) keeps the product finite for large h
        log_val = (1.0 - nu) * math.log(2.0) - special.gammaln(nu) + nu * np.log(hp) \
            + np.log(special.kve(nu, hp)) - hp
        val = np.exp(log_val)
    out[pos] = np.where(np.isfinite(val), val, 0.0)
    return out


def matern(d, params: CovarianceParams, same_site=False):
    """Matérn covariance at distance(s) ``d``.

    ``same_site`` marks pairs that are the same observation; only those get the
    nugget. Coincident but distinct observations do not.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be nonnegative")
    cov = params.sigma2 * matern_correlation(d, params.nu, params.phi)
    if params.tau2 > 0:
        cov = cov + params.tau2 * np.asarray(same_site, dtype=float)
    if cov.ndim == 0:
        return float(cov)
    return cov


def cov_matrix(points, params: CovarianceParams) -> np.ndarray:
    """Covariance matrix of the observations at ``points``."""
    S = as_locations(points)
    D = pairwise_distances(S)
    K = params.sigma2 * matern_correlation(D, params.nu, params.phi)
    K[np.diag_indices_from(K)] = params.sigma2 + params.tau2
    return K


def cross_cov(A, B, params: CovarianceParams) -> np.ndarray:
    """Covariances between distinct observations at the rows of ``A`` and ``B`` (no nugget)."""
    return params.sigma2 * matern_correlation(pairwise_distances(A, B), params.nu, params.phi)


class JitterError(np.linalg.LinAlgError):
    pass


def cholesky_jitter(K: np.ndarray, scale: float) -> np.ndarray:
    """Lower Cholesky factor of ``K``, adding diagonal jitter if needed.

    Jitter starts at ``1e-10 * scale`` and grows tenfold up to ``1e-6 * scale``.
    """
    try:
        return np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(K.shape[-1])
    for e in (1e-10, 1e-9, 1e-8, 1e-7, 1e-6):
        try:
            return np.linalg.cholesky(K + e * scale * eye)
        except np.linalg.LinAlgError:
            continue
    raise JitterError("covariance matrix is not positive definite after jitter")


def solve_range(rho_star: float, nu: float) -> float:
    """Range ``phi`` at which the unit-sill Matérn correlation at ``rho_star`` is 0.05."""
    if rho_star <= 0:
        raise ValueError("effective range must be positive")
    if nu <= 0:
        raise ValueError("nu must be positive")

    def gap(log_phi):
        return float(matern_correlation(rho_star, nu, math.exp(log_phi))) - EFFECTIVE_RANGE_LEVEL

    lo, hi = math.log(rho_star * 1e-4), math.log(rho_star * 1e4)
    if gap(lo) * gap(hi) > 0:
        raise ValueError("no sign change in range bracket")
    log_phi = optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    phi = math.exp(log_phi)
    if abs(gap(log_phi)) >= 1e-8:
        raise ValueError("range solver did not converge")
    return phi
