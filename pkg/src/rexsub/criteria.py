"""Subsample quality criteria (lower is better) and interval coverage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gp_exact import GPData, prediction_interval
from .vecchia import FittedGP, vecchia_predict

MSPE = "mspe"
INTERVAL_SCORE = "interval_score"


@dataclass(frozen=True)
class CriterionKind:
    name: str = MSPE
    alpha: float = 0.05

    def __post_init__(self):
        if self.name not in (MSPE, INTERVAL_SCORE):
            raise ValueError(f"unknown criterion {self.name!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class CriterionReport:
    value: float
    per_point: np.ndarray
    n_test: int


def _report(per_point: np.ndarray) -> CriterionReport:
    return CriterionReport(float(np.mean(per_point)), per_point, len(per_point))


def _check_test(test: GPData):
    if test.n == 0:
        raise ValueError("empty test set")


def squared_errors(pred_mean, truth) -> np.ndarray:
    return (np.asarray(pred_mean, dtype=float) - np.asarray(truth, dtype=float)) ** 2


def interval_scores(lower, upper, z, alpha: float) -> np.ndarray:
    """Interval score of each ``(lower, upper)`` interval against ``z``.

    Width plus ``2/alpha`` times the miss distance; ``z`` on an endpoint is
    not penalised.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    z = np.asarray(z, dtype=float)
    below = np.where(z < lower, lower - z, 0.0)
    above = np.where(z > upper, z - upper, 0.0)
    return (upper - lower) + (2.0 / alpha) * (below + above)


def mspe_criterion(fit: FittedGP, test: GPData) -> CriterionReport:
    _check_test(test)
    pred = vecchia_predict(fit, test.locations)
    return _report(squared_errors(pred.mean, test.z))


def interval_score_criterion(fit: FittedGP, test: GPData, alpha: float = 0.05) -> CriterionReport:
    _check_test(test)
    lower, upper = prediction_interval(vecchia_predict(fit, test.locations), alpha)
    return _report(interval_scores(lower, upper, test.z, alpha))


def coverage(fit: FittedGP, test: GPData, alpha: float = 0.05) -> float:
    """Fraction of test responses inside their prediction intervals (endpoints count)."""
    _check_test(test)
    lower, upper = prediction_interval(vecchia_predict(fit, test.locations), alpha)
    return float(np.mean((test.z >= lower) & (test.z <= upper)))


def evaluate(fit: FittedGP, test: GPData, kind: CriterionKind) -> CriterionReport:
    if kind.name == MSPE:
        return mspe_criterion(fit, test)
    return interval_score_criterion(fit, test, kind.alpha)


def validation_metrics(fit: FittedGP, validate: GPData, alpha: float = 0.05) -> dict:
    """MSPE, mean interval score and coverage from a single prediction pass."""
    _check_test(validate)
    pred = vecchia_predict(fit, validate.locations)
    lower, upper = prediction_interval(pred, alpha)
    return {
        "mspe": float(np.mean(squared_errors(pred.mean, validate.z))),
        "interval_score": float(np.mean(interval_scores(lower, upper, validate.z, alpha))),
        "coverage": float(np.mean((validate.z >= lower) & (validate.z <= upper))),
    }
