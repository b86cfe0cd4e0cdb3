from .bloch import BlochVector, max_eigen_sum, rodrigues_rotate, rotate_toward
from .optics import OpticalPipeline, OpticalStage, PropagationDirection, StageKind, propagate

__all__ = [
    "BlochVector",
    "max_eigen_sum",
    "rodrigues_rotate",
    "rotate_toward",
    "OpticalPipeline",
    "OpticalStage",
    "PropagationDirection",
    "StageKind",
    "propagate",
]
