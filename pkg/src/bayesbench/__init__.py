"""Benchmarking Bayesian (particle-filter) phase estimation.

Submodules
----------
probes      likelihood models and Fisher information
particles   particle-filter posterior on the torus
controls    random and adaptive control selection
bounds      Cramer-Rao trace, chi-squared median factor, grid floor
runner      seeded estimation runs and sweeps
losses      quadratic loss, aggregation, KDE, mean/median crossing
heuristic   particle-count scaling law and its fit
estimators  scikit-learn compatible wrappers
"""

__version__ = "0.1.0"

from .bounds import chi2_median_factor, crb_trace, discretization_floor
from .controls import StrategyConfig
from .estimators import BayesianPhaseEstimator, HeuristicScalingRegressor
from .heuristic import REFERENCE_PARAMS, HeuristicParams, eval_f, fit_heuristic
from .losses import aggregate, quadratic_loss
from .particles import ParticleCloud, init_uniform_prior, summarize
from .probes import FourierMultiportModel, SingleQubitModel, get_model
from .runner import ExperimentConfig, RunTrajectory, benchmark, run_benchmark, run_estimation

__all__ = [
    "BayesianPhaseEstimator",
    "ExperimentConfig",
    "FourierMultiportModel",
    "HeuristicParams",
    "HeuristicScalingRegressor",
    "ParticleCloud",
    "REFERENCE_PARAMS",
    "RunTrajectory",
    "SingleQubitModel",
    "StrategyConfig",
    "aggregate",
    "benchmark",
    "chi2_median_factor",
    "crb_trace",
    "discretization_floor",
    "eval_f",
    "fit_heuristic",
    "get_model",
    "init_uniform_prior",
    "quadratic_loss",
    "run_benchmark",
    "run_estimation",
    "summarize",
]
