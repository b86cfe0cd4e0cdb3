"""
Error hierarchy shared by the library, the stages and the CLI.
"""
from typing import Any, Dict, Optional


class SteeringError(Exception):
    """Base class for every failure raised by this package"""

    code = "steering_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"error": str(self), "code": self.code, "details": self.details}


class InvalidArgumentError(SteeringError, ValueError):
    """Argument outside its documented domain"""

    code = "invalid_argument"


class ConfigValidationError(InvalidArgumentError):
    """Campaign file or environment settings failed validation"""

    code = "config_validation"


class ArtifactError(InvalidArgumentError):
    """Input file missing, unreadable or lacking required columns"""

    code = "artifact"


class DegenerateGeometryError(SteeringError):
    """Rotation requested between (anti)parallel vectors"""

    code = "degenerate_geometry"


class IllPosedFitError(SteeringError):
    """Tomography design cannot identify a measurement axis"""

    code = "ill_posed_fit"


class IllConditionedError(SteeringError):
    """Efficiency formula denominator is numerically zero"""

    code = "ill_conditioned"

    def __init__(self, message: str, condition_number: float):
        super().__init__(message, {"condition_number": condition_number})
        self.condition_number = condition_number


class InsufficientDataError(SteeringError):
    """Not enough samples for the requested statistic"""

    code = "insufficient_data"


__all__ = [
    "SteeringError",
    "InvalidArgumentError",
    "ConfigValidationError",
    "ArtifactError",
    "DegenerateGeometryError",
    "IllPosedFitError",
    "IllConditionedError",
    "InsufficientDataError",
]
