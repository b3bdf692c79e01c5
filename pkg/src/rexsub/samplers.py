"""Baseline subsampling strategies: random, Latin-hypercube and sequential IMSPE."""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .covariance import CovarianceParams, cholesky_jitter, cov_matrix, cross_cov
from .dataset import Dataset
from .spatial import SpatialIndex
from .timing import CRITERION, FITTING, INITIAL_SAMPLING, TaskTimer
from .vecchia import FitConfig, VecchiaConfig, fit_mle


def _as_pool(pool) -> np.ndarray:
    pool = np.asarray(pool, dtype=np.intp).reshape(-1)
    if len(np.unique(pool)) != len(pool):
        raise ValueError("pool contains duplicate indices")
    return pool


def random_subsample(pool, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` distinct indices drawn uniformly from ``pool`` without replacement."""
    pool = _as_pool(pool)
    if n > len(pool):
        raise ValueError(f"pool of size {len(pool)} is smaller than n={n}")
    return rng.choice(pool, size=n, replace=False)


def lhs_points(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random Latin hypercube sample of ``n`` points in the unit square.

    Each axis gets an independent permutation of the ``n`` bins and a uniform
    offset inside the chosen bin.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    pts = np.empty((n, 2))
    for axis in range(2):
        bins = rng.permutation(n)
        u = rng.random(n)
        x = (bins + u) / n
        # keep the point strictly inside its bin despite rounding
        pts[:, axis] = np.minimum(x, np.nextafter((bins + 1) / n, 0.0))
    return pts


def lhs_subsample(locations, pool, n: int, rng: np.random.Generator) -> np.ndarray:
    """Match each point of a Latin hypercube over the pool's bounding box to its
    nearest not-yet-selected pool location."""
    pool = _as_pool(pool)
    if n > len(pool):
        raise ValueError(f"pool of size {len(pool)} is smaller than n={n}")
    P = np.asarray(locations, dtype=float)[pool]
    lo, hi = P.min(axis=0), P.max(axis=0)
    targets = lo + lhs_points(n, rng) * (hi - lo)
    index = SpatialIndex(P)
    taken = np.zeros(len(pool), dtype=bool)
    chosen = []
    for q in targets:
        # at most len(chosen) of the nearest are taken, so one more suffices
        _, near = index.knn(q, len(chosen) + 1)
        pick = int(near[~taken[near]][0])
        taken[pick] = True
        chosen.append(pick)
    return pool[np.asarray(chosen, dtype=np.intp)]


def imspe_grid(bounds_lo, bounds_hi, grid: int) -> np.ndarray:
    """Cell-centre lattice of ``grid x grid`` points over a bounding box."""
    t = (np.arange(grid) + 0.5) / grid
    gx, gy = np.meshgrid(bounds_lo[0] + t * (bounds_hi[0] - bounds_lo[0]),
                         bounds_lo[1] + t * (bounds_hi[1] - bounds_lo[1]), indexing="xy")
    return np.column_stack([gx.ravel(), gy.ravel()])


def imspe_candidates(design, candidates, grid_pts, params: CovarianceParams) -> np.ndarray:
    """Grid-averaged kriging variance over ``sigma2`` after adding each candidate to ``design``.

    Uses the rank-one variance update, so each candidate costs one pass over
    the grid rather than a fresh factorisation.
    """
    design = np.asarray(design, dtype=float)
    candidates = np.asarray(candidates, dtype=float)
    K = cov_matrix(design, params)
    L = cholesky_jitter(K, params.total_variance)
    kg = cross_cov(design, grid_pts, params)  # (k, G)
    kc = cross_cov(design, candidates, params)  # (k, C)
    vg = solve_triangular(L, kg, lower=True)
    vc = solve_triangular(L, kc, lower=True)
    base = params.total_variance - np.einsum("ij,ij->j", vg, vg)  # (G,)
    kcg = cross_cov(candidates, grid_pts, params)  # (C, G)
    resid_cov = kcg - vc.T @ vg  # cov(Z(c), Z(g) | design)
    resid_var = params.total_variance - np.einsum("ij,ij->j", vc, vc)  # (C,)
    new_var = base[None, :] - resid_cov ** 2 / resid_var[:, None]
    return np.maximum(new_var, 0.0).mean(axis=1) / params.sigma2


def imspe_sequential(
    dataset: Dataset,
    pool,
    n: int,
    rng: np.random.Generator,
    n_init: int = 9,
    grid: int = 32,
    cand: int = 100,
    vecchia: VecchiaConfig = VecchiaConfig(),
    fit: FitConfig = FitConfig(),
    refit_every: int = 5,
    timer: Optional[TaskTimer] = None,
    trace: Optional[list] = None,
) -> np.ndarray:
    """Greedy sequential design that adds the candidate minimising the grid IMSPE.

    Starts from a Latin-hypercube subsample of ``n_init`` points. At each step
    ``cand`` unselected pool points are drawn at random and the one with the
    smallest integrated kriging variance is added. Covariance parameters are
    re-estimated every ``refit_every`` additions. When ``trace`` is a list,
    one ``(candidates, imspe_values, chosen, params)`` tuple is appended per step.
    """
    pool = _as_pool(pool)
    if not n_init <= n <= len(pool):
        raise ValueError("need n_init <= n <= pool size")
    timer = timer if timer is not None else TaskTimer()
    S = dataset.locations
    with timer.task(INITIAL_SAMPLING):
        selected = list(lhs_subsample(S, pool, n_init, rng))
    if n == n_init:
        return np.asarray(selected, dtype=np.intp)

    lo, hi = S[pool].min(axis=0), S[pool].max(axis=0)
    grid_pts = imspe_grid(lo, hi, grid)
    with timer.task(FITTING):
        params = fit_mle(dataset.subset(selected, centered=True), vecchia, fit).params
    added = 0
    in_design = np.zeros(dataset.N, dtype=bool)
    in_design[selected] = True
    while len(selected) < n:
        with timer.task(CRITERION):
            avail = pool[~in_design[pool]]
            if len(avail) == 0:
                raise ValueError("pool exhausted")
            cands = rng.choice(avail, size=min(cand, len(avail)), replace=False)
            values = imspe_candidates(S[selected], S[cands], grid_pts, params)
            best = int(np.argmin(values))
        if trace is not None:
            trace.append((cands.copy(), values.copy(), int(cands[best]), params))
        selected.append(int(cands[best]))
        in_design[cands[best]] = True
        added += 1
        if added % refit_every == 0 and len(selected) < n:
            with timer.task(FITTING):
                params = fit_mle(dataset.subset(selected, centered=True), vecchia, fit).params
    return np.asarray(selected, dtype=np.intp)
