"""Minimal sensitive-feature disclosure for classifier inference.

Per test sample, find the smallest set of sensitive features whose values
pin the classifier output down exactly (a pure core set) or with probability
at least 1 - delta, and benchmark the accuracy / disclosure trade-off
against full disclosure and the brute-force optimum.
"""

from .bench import SweepConfig, SweepResult, run_sweep, synthetic_dataset
from .coreset import (
    CoreSetResult,
    opt_min_core,
    test_delta_linear,
    test_delta_nonlinear,
    test_pure_grid,
    test_pure_linear,
)
from .data_io import Dataset, FeatureSpace, load_csv, pick_sensitive, split
from .engine import EngineConfig, RevealState, certify, leakage, run, score_feature
from .gaussian import ConditionalGaussian, GaussianPrior, condition, fit_prior, sample
from .models import LinearModel, MlpModel, input_gradient, predict, score, train_logistic, train_mlp
from .predictive import (
    LabelDistribution,
    ScoreDistribution,
    entropy,
    epsilon_bound,
    linear_score_dist,
    mc_label_dist,
    taylor_score_dist,
    threshold_dist,
)

__version__ = "0.1.0"

__all__ = [
    "CoreSetResult", "ConditionalGaussian", "Dataset", "EngineConfig",
    "FeatureSpace", "GaussianPrior", "LabelDistribution", "LinearModel",
    "MlpModel", "RevealState", "ScoreDistribution", "SweepConfig",
    "SweepResult", "certify", "condition", "entropy", "epsilon_bound",
    "fit_prior", "input_gradient", "leakage", "linear_score_dist", "load_csv",
    "mc_label_dist", "opt_min_core", "pick_sensitive", "predict", "run",
    "run_sweep", "sample", "score", "score_feature", "split",
    "synthetic_dataset", "taylor_score_dist", "test_delta_linear",
    "test_delta_nonlinear", "test_pure_grid", "test_pure_linear",
    "threshold_dist", "train_logistic", "train_mlp",
]
