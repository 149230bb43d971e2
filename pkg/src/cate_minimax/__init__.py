"""Pointwise CATE estimation with second-order corrections, lower-bound constructions and rate sweeps."""

from .basis import LocalizedFrame, TensorBasisSpec, partition_basis
from .construction import LowerBoundConfig, Regime, couple_parameters, sample
from .data import Dataset
from .errors import (
    CateMinimaxError,
    ConfigError,
    ConstructionError,
    DegenerateFitError,
    NumericalGuardError,
    SingularMatrixError,
)
from .estimator import EstimatorConfig, FitResult, estimate_cate, projection_oracle, tuning_rule
from .harness import ExperimentConfig, RateReport, ScenarioSpec, fit_slope, run_rate_sweep
from .hellinger import delta_bounds, minimax_exponent, mixture_hellinger_bound
from .nuisance import NuisanceConfig

__all__ = [
    "CateMinimaxError",
    "ConfigError",
    "ConstructionError",
    "DegenerateFitError",
    "NumericalGuardError",
    "SingularMatrixError",
    "Dataset",
    "LocalizedFrame",
    "TensorBasisSpec",
    "partition_basis",
    "LowerBoundConfig",
    "Regime",
    "couple_parameters",
    "sample",
    "delta_bounds",
    "minimax_exponent",
    "mixture_hellinger_bound",
    "NuisanceConfig",
    "EstimatorConfig",
    "FitResult",
    "estimate_cate",
    "projection_oracle",
    "tuning_rule",
    "ExperimentConfig",
    "RateReport",
    "ScenarioSpec",
    "fit_slope",
    "run_rate_sweep",
]
