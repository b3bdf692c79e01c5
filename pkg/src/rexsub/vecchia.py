"""Vecchia-approximated Gaussian-process likelihood, prediction and fitting.

The joint density is factorised in an ordering of the sites, each site
conditioned on at most ``m`` of its nearest predecessors. Every conditional
is a small dense solve. For the closed-form smoothness values (0.5, 1.5,
2.5) the solves run in a compiled loop; other smoothness values go through
one batched numpy call over padded blocks. Either way the maximum-likelihood
fit stays cheap enough to run inside the exchange search.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from . import _kernels
from .covariance import CovarianceParams, matern_correlation
from .gp_exact import LOG_2PI, GPData, Prediction, clamp_variance
from .spatial import SpatialIndex, as_locations, maxmin_order, pairwise_distances

ORDERINGS = ("maxmin", "coordinate", "given")
_JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


class FitError(RuntimeError):
    """Raised when no likelihood optimisation produced a usable fit."""


@dataclass(frozen=True)
class VecchiaConfig:
    m: int = 10
    ordering: str = "maxmin"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"unknown ordering {self.ordering!r}")


@dataclass(frozen=True)
class ConditioningSets:
    """Site ordering plus, for each ordered position, its conditioning sites.

    ``neighbors[i]`` holds original site indices of the conditioning set of
    site ``order[i]``, nearest first, padded with ``-1``.
    """

    order: np.ndarray
    neighbors: np.ndarray

    @property
    def sizes(self) -> np.ndarray:
        return (self.neighbors >= 0).sum(axis=1)

    def set_of(self, position: int) -> np.ndarray:
        row = self.neighbors[position]
        return row[row >= 0]


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`fit_mle`.

    The optimiser works on ``(log phi, log sigma2, log(tau2 - floor))`` with a
    Nelder-Mead simplex, profiled over the candidate smoothness values.
    """

    nu_grid: Sequence[float] = (0.5, 1.5)
    max_iters: int = 200
    rel_tol: float = 1e-6
    restarts: int = 1
    init_nugget_frac: float = 0.1
    init_range_frac: float = 0.1
    nugget_floor: float = 1e-8
    init: Optional[CovarianceParams] = None

    def __post_init__(self):
        if len(self.nu_grid) == 0:
            raise ValueError("nu_grid must be nonempty")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass(frozen=True)
class FittedGP:
    params: CovarianceParams
    data: GPData
    config: VecchiaConfig
    sets: ConditioningSets
    coef: np.ndarray  # (n, m) conditional weights b_i, aligned with sets.neighbors
    cond_var: np.ndarray  # (n,) conditional variances d_i
    loglik: float
    init_loglik: float = float("nan")
    index: SpatialIndex = field(default=None, repr=False, compare=False)

    def predict(self, s0) -> Prediction:
        return vecchia_predict(self, s0)


def _order(S: np.ndarray, ordering: str) -> np.ndarray:
    if ordering == "maxmin":
        return maxmin_order(S)
    if ordering == "coordinate":
        return np.lexsort((S[:, 1], S[:, 0]))
    return np.arange(len(S))


def nearest_predecessors(S: np.ndarray, order: np.ndarray, m: int) -> np.ndarray:
    """For each ordered position, the ``min(m, i)`` nearest earlier sites (ties by lowest index)."""
    out = np.full((len(order), m), -1, dtype=np.int64)
    _kernels.nearest_predecessors_fill(np.ascontiguousarray(S, dtype=float),
                                       np.ascontiguousarray(order, dtype=np.int64), out)
    return out.astype(np.intp)


def build_sets(points, cfg: VecchiaConfig = VecchiaConfig(), order=None) -> ConditioningSets:
    """Ordering and nearest-predecessor conditioning sets for ``points``.

    ``order`` overrides the configured ordering when ``cfg.ordering == "given"``.
    """
    S = as_locations(points)
    if cfg.ordering == "given" and order is not None:
        order = np.asarray(order, dtype=np.intp)
        if sorted(order.tolist()) != list(range(len(S))):
            raise ValueError("order must be a permutation of the sites")
    else:
        order = _order(S, cfg.ordering)
    m_eff = max(min(cfg.m, len(S) - 1), 0)
    return ConditioningSets(order=order, neighbors=nearest_predecessors(S, order, m_eff))


class _Blocks:
    """Padded distance blocks for batched evaluation of all conditionals.

    Row ``i`` of every block is laid out ``[pads..., neighbours..., site]``;
    pad entries are decoupled unit-variance dummies with zero response.
    """

    def __init__(self, S: np.ndarray, residuals: np.ndarray, sets: ConditioningSets):
        n, m = sets.neighbors.shape
        B = m + 1
        self.n, self.m = n, m
        members = np.full((n, B), -1, dtype=np.intp)
        sizes = sets.sizes
        for i in range(n):
            k = sizes[i]
            # nearest neighbour sits next to the site; padding goes first
            members[i, m - k:m] = sets.neighbors[i, :k][::-1]
        members[:, m] = sets.order
        valid = members >= 0
        safe = np.where(valid, members, 0)
        X = S[safe]  # (n, B, 2)
        self.D = np.hypot(X[:, :, None, 0] - X[:, None, :, 0], X[:, :, None, 1] - X[:, None, :, 1])
        self.mask = (valid[:, :, None] & valid[:, None, :]).astype(float)
        self.valid = valid.astype(float)
        self.pad = (~valid).astype(float)
        self.zb = np.where(valid, residuals[safe], 0.0)
        self.members = members

    def conditionals(self, params: CovarianceParams, jitter: float = 0.0):
        C = params.sigma2 * matern_correlation(self.D, params.nu, params.phi) * self.mask
        diag = (params.tau2 + jitter) * self.valid + self.pad
        idx = np.arange(self.m + 1)
        C[:, idx, idx] += diag
        m = self.m
        if m == 0:
            return np.zeros((self.n, 0)), C[:, 0, 0]
        c = C[:, :m, m]
        b = np.linalg.solve(C[:, :m, :m], c[..., None])[..., 0]
        d = C[:, m, m] - np.einsum("ij,ij->i", c, b)
        return b, d

    def safe_conditionals(self, params: CovarianceParams):
        scale = params.total_variance
        for e in (0.0,) + _JITTERS:
            try:
                b, d = self.conditionals(params, e * scale)
            except np.linalg.LinAlgError:
                continue
            if np.all(d > 0) and np.all(np.isfinite(b)):
                return b, d
        raise np.linalg.LinAlgError("non-positive conditional variance after jitter")

    def loglik(self, params: CovarianceParams) -> float:
        b, d = self.safe_conditionals(params)
        r = self.zb[:, self.m] - np.einsum("ij,ij->i", b, self.zb[:, : self.m])
        return float(-0.5 * (self.n * LOG_2PI + np.log(d).sum() + (r * r / d).sum()))

    def coefficients(self, params: CovarianceParams):
        """``b`` re-aligned to ``sets.neighbors`` (nearest first) and ``d``."""
        b, d = self.safe_conditionals(params)
        return b[:, ::-1].copy(), d


class _Engine:
    """Evaluates the conditionals of one (data, sets) pair for varying parameters."""

    def __init__(self, S: np.ndarray, residuals: np.ndarray, sets: ConditioningSets):
        self.S = np.ascontiguousarray(S, dtype=float)
        self.r = np.ascontiguousarray(residuals, dtype=float)
        self.order = np.ascontiguousarray(sets.order, dtype=np.int64)
        self.nbrs = np.ascontiguousarray(sets.neighbors, dtype=np.int64)
        self._blocks = None

    @property
    def blocks(self) -> "_Blocks":
        if self._blocks is None:
            sets = ConditioningSets(self.order, self.nbrs)
            self._blocks = _Blocks(self.S, self.r, sets)
        return self._blocks

    def loglik(self, params: CovarianceParams) -> float:
        code = _kernels.CLOSED_FORM_NU.get(params.nu)
        if code is None:
            return self.blocks.loglik(params)
        scale = params.total_variance
        for e in (0.0,) + _JITTERS:
            val = _kernels.loglik(self.S, self.order, self.nbrs, self.r, code,
                                  params.phi, params.sigma2, params.tau2, e * scale)
            if np.isfinite(val):
                return float(val)
        raise np.linalg.LinAlgError("non-positive conditional variance after jitter")

    def coefficients(self, params: CovarianceParams):
        code = _kernels.CLOSED_FORM_NU.get(params.nu)
        if code is None:
            return self.blocks.coefficients(params)
        n, m = self.nbrs.shape
        b, d = np.zeros((n, m)), np.zeros(n)
        scale = params.total_variance
        for e in (0.0,) + _JITTERS:
            if _kernels.conditionals(self.S, self.order, self.nbrs, code, params.phi,
                                     params.sigma2, params.tau2, e * scale, b, d):
                return b, d
        raise np.linalg.LinAlgError("non-positive conditional variance after jitter")


def vecchia_loglik(data: GPData, params: CovarianceParams, sets: ConditioningSets) -> float:
    """Vecchia log-likelihood of the centred responses."""
    if len(sets.order) != data.n:
        raise ValueError("conditioning sets do not match the data")
    return _Engine(data.locations, data.residuals, sets).loglik(params)


def conditional_coefficients(data: GPData, params: CovarianceParams, sets: ConditioningSets):
    """Per-site conditional weights ``b`` (aligned with ``sets.neighbors``) and variances ``d``."""
    return _Engine(data.locations, data.residuals, sets).coefficients(params)


def vecchia_predict(fit: FittedGP, s0, m: Optional[int] = None) -> Prediction:
    """Predict at the rows of ``s0`` conditioning each site on its nearest training sites."""
    S0 = as_locations(s0)
    data, params = fit.data, fit.params
    k = min(m or fit.config.m, data.n)
    index = fit.index if fit.index is not None else SpatialIndex(data.locations)
    _, nb = index.knn_many(S0, k)  # (n0, k), nearest first
    code = _kernels.CLOSED_FORM_NU.get(params.nu)
    if code is not None:
        return _predict_compiled(data, params, S0, nb, code)
    return _predict_batched(data, params, S0, nb)


def _predict_compiled(data, params, S0, nb, code) -> Prediction:
    mean = np.empty(len(S0))
    var = np.empty(len(S0))
    nb = np.ascontiguousarray(nb, dtype=np.int64)
    for e in (0.0,) + _JITTERS:
        if _kernels.predict(data.locations, data.residuals, S0, nb, code, params.phi,
                            params.sigma2, params.tau2, e * params.total_variance, mean, var):
            return Prediction(data.mean_offset + mean, clamp_variance(var))
    raise np.linalg.LinAlgError("prediction system singular after jitter")


def _predict_batched(data, params, S0, nb) -> Prediction:
    k = nb.shape[1]
    X = data.locations[nb]  # (n0, k, 2)
    Dnn = np.hypot(X[:, :, None, 0] - X[:, None, :, 0], X[:, :, None, 1] - X[:, None, :, 1])
    Cnn = params.sigma2 * matern_correlation(Dnn, params.nu, params.phi)
    idx = np.arange(k)
    Cnn[:, idx, idx] = params.total_variance
    c0 = params.sigma2 * matern_correlation(
        np.hypot(X[:, :, 0] - S0[:, None, 0], X[:, :, 1] - S0[:, None, 1]), params.nu, params.phi
    )
    for e in (0.0,) + _JITTERS:
        try:
            A = Cnn if e == 0 else Cnn + e * params.total_variance * np.eye(k)
            w = np.linalg.solve(A, c0[..., None])[..., 0]
            break
        except np.linalg.LinAlgError:
            continue
    else:
        raise np.linalg.LinAlgError("prediction system singular after jitter")
    r = data.residuals[nb]
    mean = data.mean_offset + np.einsum("ij,ij->i", w, r)
    var = params.total_variance - np.einsum("ij,ij->i", w, c0)
    return Prediction(mean, clamp_variance(var))


def condition(data: GPData, params: CovarianceParams, vcfg: VecchiaConfig = VecchiaConfig()) -> FittedGP:
    """Wrap ``data`` and known ``params`` as a :class:`FittedGP` without optimising."""
    sets = build_sets(data.locations, vcfg)
    engine = _Engine(data.locations, data.residuals, sets)
    coef, cond_var = engine.coefficients(params)
    ll = engine.loglik(params)
    return FittedGP(params=params, data=data, config=vcfg, sets=sets, coef=coef, cond_var=cond_var,
                    loglik=ll, init_loglik=ll, index=SpatialIndex(data.locations))


def _bbox_diameter(S: np.ndarray) -> float:
    span = S.max(axis=0) - S.min(axis=0)
    diam = float(np.hypot(span[0], span[1]))
    return diam if diam > 0 else 1.0


def default_init(data: GPData, fcfg: FitConfig):
    """Scale-aware starting values ``(phi, sigma2, tau2)``."""
    var0 = float(np.var(data.residuals))
    if var0 <= 0:
        var0 = 1.0
    diam = _bbox_diameter(data.locations)
    tau2 = fcfg.init_nugget_frac * var0
    return fcfg.init_range_frac * diam, var0 - tau2, tau2


def fit_mle(data: GPData, vcfg: VecchiaConfig = VecchiaConfig(), fcfg: FitConfig = FitConfig()) -> FittedGP:
    """Maximum Vecchia-likelihood estimate of the Matérn parameters.

    For each smoothness in ``fcfg.nu_grid`` a Nelder-Mead simplex maximises the
    likelihood over log range, log partial sill and log excess nugget, then
    restarts from its optimum; the best smoothness wins.
    """
    if data.n < 3:
        raise ValueError("need at least 3 observations to fit")
    sets = build_sets(data.locations, vcfg)
    blocks = _Engine(data.locations, data.residuals, sets)

    var_scale = float(np.var(data.residuals)) or 1.0
    floor = fcfg.nugget_floor * var_scale
    diam = _bbox_diameter(data.locations)
    if fcfg.init is not None:
        phi0, s0, t0 = fcfg.init.phi, fcfg.init.sigma2, fcfg.init.tau2
    else:
        phi0, s0, t0 = default_init(data, fcfg)
    x0 = np.log([phi0, max(s0, 1e-6 * var_scale), max(t0 - floor, 1e-12 * var_scale)])
    bounds = [
        (math.log(1e-4 * diam), math.log(1e3 * diam)),
        (math.log(1e-6 * var_scale), math.log(1e4 * var_scale)),
        (math.log(1e-12 * var_scale), math.log(1e2 * var_scale)),
    ]
    x0 = np.clip(x0, [lo for lo, _ in bounds], [hi for _, hi in bounds])

    def unpack(x, nu):
        return CovarianceParams(nu=nu, phi=math.exp(x[0]), sigma2=math.exp(x[1]), tau2=floor + math.exp(x[2]))

    best = None
    for nu in fcfg.nu_grid:

        def objective(x, nu=nu):
            try:
                val = -blocks.loglik(unpack(x, nu))
            except (np.linalg.LinAlgError, ValueError, OverflowError):
                return np.inf
            return val if np.isfinite(val) else np.inf

        x, f = x0, objective(x0)
        f_init = f
        for _ in range(1 + fcfg.restarts):
            fatol = fcfg.rel_tol * max(1.0, abs(f)) if np.isfinite(f) else fcfg.rel_tol
            res = optimize.minimize(
                objective, x, method="Nelder-Mead", bounds=bounds,
                options={"maxiter": fcfg.max_iters, "xatol": 1e-4, "fatol": fatol},
            )
            if res.fun <= f:
                x, f = res.x, float(res.fun)
        if np.isfinite(f) and (best is None or f < best[0]):
            best = (f, x, nu, f_init)

    if best is None:
        raise FitError("fit failed")
    f, x, nu, f_init = best
    params = unpack(x, nu)
    coef, cond_var = blocks.coefficients(params)
    return FittedGP(
        params=params, data=data, config=vcfg, sets=sets, coef=coef, cond_var=cond_var,
        loglik=-f, init_loglik=-f_init, index=SpatialIndex(data.locations),
    )
