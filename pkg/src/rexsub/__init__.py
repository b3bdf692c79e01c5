"""Prediction-optimal subsampling of large spatial datasets.

A randomised exchange search picks small subsamples whose fitted Gaussian
process predicts a held-out test set well. Model fits use a Vecchia
approximation of the Matérn GP likelihood.
"""

__version__ = "0.1.0"

from .covariance import CovarianceParams, cov_matrix, matern, solve_range
from .criteria import CriterionKind, coverage, interval_score_criterion, mspe_criterion
from .dataset import Dataset
from .exchange import RexsubConfig, evaluate_candidate, rexsub_search, select_test_set
from .gp_exact import GPData, Prediction, exact_loglik, krige, prediction_interval
from .samplers import imspe_sequential, lhs_points, lhs_subsample, random_subsample
from .simulate import make_dataset, make_setting, simulate_grf
from .spatial import build_index, euclidean_distance, maxmin_order
from .vecchia import FitConfig, FittedGP, VecchiaConfig, build_sets, condition, fit_mle, vecchia_loglik, vecchia_predict

__all__ = [
    "CovarianceParams", "CriterionKind", "Dataset", "FitConfig", "FittedGP", "GPData",
    "Prediction", "RexsubConfig", "VecchiaConfig", "build_index", "build_sets", "condition", "cov_matrix",
    "coverage", "euclidean_distance", "evaluate_candidate", "exact_loglik", "fit_mle",
    "imspe_sequential", "interval_score_criterion", "krige", "lhs_points", "lhs_subsample",
    "make_dataset", "make_setting", "matern", "maxmin_order", "mspe_criterion",
    "prediction_interval", "random_subsample", "rexsub_search", "select_test_set",
    "simulate_grf", "solve_range", "vecchia_loglik", "vecchia_predict",
]
