from .base_stage import BaseStage
from .pipeline_stages import STAGES, BoundsStage, CalibrationStage, ExperimentStage, MeasurementStage

__all__ = ["BaseStage", "STAGES", "BoundsStage", "CalibrationStage", "ExperimentStage", "MeasurementStage"]
