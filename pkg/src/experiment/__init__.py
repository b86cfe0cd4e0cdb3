from .estimator import ResidualReport, bootstrap_standard_error, estimate
from .simulator import ExperimentConfig, TrialCounts, joint_outcome_distribution, simulate
from .spacetime import SpacetimeBound, ftl_speed

__all__ = [
    "ResidualReport",
    "bootstrap_standard_error",
    "estimate",
    "ExperimentConfig",
    "TrialCounts",
    "joint_outcome_distribution",
    "simulate",
    "SpacetimeBound",
    "ftl_speed",
]
