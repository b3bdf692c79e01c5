"""Gaussian random fields and the eight simulation settings."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .covariance import CovarianceParams, cholesky_jitter, cov_matrix, solve_range
from .dataset import Dataset, random_split
from .gp_exact import GPData
from .spatial import as_locations
from .vecchia import VecchiaConfig, build_sets, conditional_coefficients

EXACT_CAP = 4000

# (nu, effective range, nugget share of total variance)
SETTINGS = {
    1: (0.5, 0.3, 0.01),
    2: (1.5, 0.3, 0.01),
    3: (0.5, 0.6, 0.01),
    4: (1.5, 0.6, 0.01),
    5: (0.5, 0.3, 0.10),
    6: (1.5, 0.3, 0.10),
    7: (0.5, 0.6, 0.10),
    8: (1.5, 0.6, 0.10),
}


@dataclass(frozen=True)
class Setting:
    id: int
    nu: float
    rho_star: float
    noise_ratio: float
    sigma2: float = 1.0

    @cached_property
    def phi(self) -> float:
        return solve_range(self.rho_star, self.nu)

    @property
    def tau2(self) -> float:
        return self.noise_ratio / (1.0 - self.noise_ratio) * self.sigma2

    @property
    def params(self) -> CovarianceParams:
        return CovarianceParams(nu=self.nu, phi=self.phi, sigma2=self.sigma2, tau2=self.tau2)


def make_setting(setting_id: int) -> Setting:
    if setting_id not in SETTINGS:
        raise ValueError(f"setting id must be in 1..8, got {setting_id}")
    nu, rho, ratio = SETTINGS[setting_id]
    return Setting(setting_id, nu, rho, ratio)


def simulate_grf(
    points,
    params: CovarianceParams,
    rng: np.random.Generator,
    method: str = "exact",
    m_sim: int = 30,
    ordering: str = "maxmin",
    exact_cap: int = EXACT_CAP,
) -> np.ndarray:
    """Zero-mean Gaussian field (nugget included) at ``points``.

    ``"exact"`` multiplies standard normals by the Cholesky factor of the full
    covariance. ``"vecchia"`` draws sites sequentially in ``ordering``, each
    from its conditional given its ``m_sim`` nearest earlier sites; the
    ``i``-th normal draw feeds the ``i``-th ordered site.
    """
    S = as_locations(points)
    N = len(S)
    if method == "exact":
        if N > exact_cap:
            raise ValueError(f"exact simulation capped at {exact_cap} sites; use method='vecchia'")
        L = cholesky_jitter(cov_matrix(S, params), params.total_variance)
        return L @ rng.standard_normal(N)
    if method != "vecchia":
        raise ValueError(f"unknown simulation method {method!r}")
    sets = build_sets(S, VecchiaConfig(m=m_sim, ordering=ordering))
    b, d = conditional_coefficients(GPData(S, np.zeros(N)), params, sets)
    eps = rng.standard_normal(N)
    z = np.zeros(N)
    sd = np.sqrt(d)
    for i, site in enumerate(sets.order):
        nb = sets.neighbors[i]
        k = int((nb >= 0).sum())
        z[site] = b[i, :k] @ z[nb[:k]] + sd[i] * eps[i]
    return z


def make_dataset(setting: Setting, N: int, n_train: int, rng: np.random.Generator,
                 method: str = "auto", m_sim: int = 30) -> Dataset:
    """Uniform locations on the unit square, a simulated field and a random train/validate split."""
    if not 0 < n_train < N:
        raise ValueError("need 0 < n_train < N")
    if method == "auto":
        method = "exact" if N <= EXACT_CAP else "vecchia"
    S = rng.random((N, 2))
    z = simulate_grf(S, setting.params, rng, method=method, m_sim=m_sim)
    train, validate = random_split(N, N - n_train, rng)
    return Dataset(S, z, train, validate, label=f"setting{setting.id}", params=setting.params)
