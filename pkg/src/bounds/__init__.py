from .strategies import (
    BoundResult,
    CheatStrategy,
    FenellaEnsemble,
    MeasurementSet,
    StrategyLine,
    StrategySpace,
    bound_lines,
    steering_bound,
    strategy_value,
)
from .optimize import GainOptimum, min_purity_curve, optimal_gain, tsirelson, werner_residual

__all__ = [
    "BoundResult",
    "CheatStrategy",
    "FenellaEnsemble",
    "MeasurementSet",
    "StrategyLine",
    "StrategySpace",
    "bound_lines",
    "steering_bound",
    "strategy_value",
    "GainOptimum",
    "min_purity_curve",
    "optimal_gain",
    "tsirelson",
    "werner_residual",
]
