"""Randomised exchange search for prediction-optimal spatial subsamples.

Starting from a random subsample, each position in turn is offered a batch of
random replacement sites; the best exchange is kept only if it strictly
lowers the criterion on the held-out test set.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import time
from typing import List, Optional

import numpy as np

from .criteria import CriterionKind, evaluate
from .dataset import Dataset
from .gp_exact import GPData
from .timing import CRITERION, FITTING, INITIAL_SAMPLING, ROW_EXCHANGES, TaskTimer
from .vecchia import FitConfig, FitError, FittedGP, VecchiaConfig, fit_mle

_INFEASIBLE = (FitError, np.linalg.LinAlgError, ValueError, FloatingPointError)


@dataclass(frozen=True)
class RexsubConfig:
    n: int = 25
    n_cand: int = 10
    n_repeat: int = 2
    criterion: CriterionKind = CriterionKind()
    vecchia: VecchiaConfig = VecchiaConfig()
    fit: FitConfig = FitConfig()
    seed: int = 0

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("n must be at least 3")
        if self.n_cand < 1 or self.n_repeat < 1:
            raise ValueError("n_cand and n_repeat must be positive")


@dataclass(frozen=True)
class TraceEvent:
    repeat: int
    position: int
    best_candidate: int  # candidate slot t*, -1 when every candidate failed
    new_index: int  # dataset index proposed by t*, -1 when every candidate failed
    phi_candidate: float
    accepted: bool
    phi_best: float
    note: str = ""
    candidates: tuple = ()  # dataset indices proposed at this position, in slot order


@dataclass
class SearchTrace:
    phi_initial: float = float("inf")
    initial: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))
    events: List[TraceEvent] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def phi_best_path(self) -> np.ndarray:
        return np.array([self.phi_initial] + [e.phi_best for e in self.events])


@dataclass(frozen=True)
class SubsampleResult:
    indices: np.ndarray
    phi_best: float
    fit: Optional[FittedGP]
    trace: SearchTrace


def _stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator keyed by ``key`` so draws never depend on evaluation order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def select_test_set(train_pool, p: float, rng: np.random.Generator):
    """Carve a uniform test set of ``floor(p * |pool|)`` sites out of ``train_pool``.

    Returns ``(test, selectable)``, both sorted and disjoint.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    pool = np.asarray(train_pool, dtype=np.intp)
    n_test = int(np.floor(p * len(pool)))
    if n_test < 1:
        raise ValueError("test set would be empty")
    test = np.sort(rng.choice(pool, size=n_test, replace=False))
    selectable = np.setdiff1d(pool, test)
    return test, selectable


def _evaluate(dataset: Dataset, test: GPData, indices: np.ndarray, cfg: RexsubConfig):
    t0 = time.thread_time()
    try:
        fit = fit_mle(dataset.subset(indices, centered=True), cfg.vecchia, cfg.fit)
    except _INFEASIBLE:
        return np.inf, None, time.thread_time() - t0, 0.0
    t1 = time.thread_time()
    try:
        phi = evaluate(fit, test, cfg.criterion).value
    except _INFEASIBLE:
        phi = np.inf
    if not np.isfinite(phi):
        phi = np.inf
    return float(phi), fit, t1 - t0, time.thread_time() - t1


def evaluate_candidate(dataset: Dataset, test_idx, indices, cfg: RexsubConfig):
    """Fit the subsample ``indices`` and score it on ``test_idx``.

    Returns ``(phi, fit)``; an infeasible candidate yields ``(inf, None)``.
    """
    test = dataset.subset(test_idx)
    phi, fit, _, _ = _evaluate(dataset, test, np.asarray(indices, dtype=np.intp), cfg)
    return phi, fit


def rexsub_search(
    dataset: Dataset,
    test_idx,
    cfg: RexsubConfig,
    selectable=None,
    workers: int = 1,
    timer: Optional[TaskTimer] = None,
) -> SubsampleResult:
    """Run the randomised exchange search.

    ``selectable`` defaults to the training pool minus ``test_idx``. Candidate
    fits of one position run on ``workers`` threads; results are reduced in
    candidate order, so the outcome does not depend on ``workers``.
    """
    test_idx = np.asarray(test_idx, dtype=np.intp)
    if selectable is None:
        selectable = np.setdiff1d(dataset.train, test_idx)
    selectable = np.asarray(selectable, dtype=np.intp)
    if np.intersect1d(selectable, test_idx).size:
        raise ValueError("selectable pool overlaps the test set")
    if len(selectable) < cfg.n + cfg.n_cand:
        raise ValueError("selectable pool smaller than n + n_cand")
    timer = timer if timer is not None else TaskTimer()
    test = dataset.subset(test_idx)
    trace = SearchTrace()

    def run(batch):
        results = list(pool.map(lambda I: _evaluate(dataset, test, I, cfg), batch)) if pool \
            else [_evaluate(dataset, test, I, cfg) for I in batch]
        for _, _, t_fit, t_crit in results:
            timer.add(FITTING, t_fit)
            timer.add(CRITERION, t_crit)
        return results

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        with timer.task(INITIAL_SAMPLING):
            best = np.sort(_stream(cfg.seed, 0).choice(selectable, size=cfg.n, replace=False))
        phi_best, fit_best, _, _ = run([best])[0]
        trace.phi_initial = phi_best
        trace.initial = best.copy()

        in_best = np.zeros(dataset.N, dtype=bool)
        for r in range(cfg.n_repeat):
            for j in range(cfg.n):
                with timer.task(ROW_EXCHANGES):
                    in_best[:] = False
                    in_best[best] = True
                    avail = selectable[~in_best[selectable]]
                    new = _stream(cfg.seed, 1, r, j).choice(avail, size=cfg.n_cand, replace=False)
                    proposals = []
                    for c in new:
                        I = best.copy()
                        I[j] = c
                        proposals.append(I)
                results = run(proposals)
                with timer.task(ROW_EXCHANGES):
                    phis = np.array([res[0] for res in results])
                    if not np.any(np.isfinite(phis)):
                        trace.events.append(TraceEvent(r, j, -1, -1, np.inf, False, phi_best,
                                                       "all candidates infeasible", tuple(map(int, new))))
                        continue
                    t_star = int(np.argmin(phis))
                    accepted = bool(phis[t_star] < phi_best)
                    if accepted:
                        best = proposals[t_star]
                        phi_best = float(phis[t_star])
                        fit_best = results[t_star][1]
                    trace.events.append(TraceEvent(r, j, t_star, int(new[t_star]), float(phis[t_star]),
                                                   accepted, phi_best, candidates=tuple(map(int, new))))
    finally:
        if pool is not None:
            pool.shutdown()
    trace.timings = timer.as_dict()
    return SubsampleResult(indices=best, phi_best=phi_best, fit=fit_best, trace=trace)
