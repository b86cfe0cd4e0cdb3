"""
Waveplate / Pockels-cell pipelines acting on Bloch vectors.

Every element is a rotation: a waveplate with fast axis at physical angle t
rotates about the linear-polarization axis (sin 2t, 0, -cos 2t) by its
retardance, the Pockels cell rotates about the D/A axis by the phase selected
for the current setting. Propagating backward applies the inverse sense.
"""
import itertools
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from ..utils.errors import InvalidArgumentError
from .bloch import UNIT_TOL, VectorLike, as_vector, rodrigues_rotate

logger = logging.getLogger(__name__)

V_STATE = np.array([0.0, 0.0, 1.0])
H_STATE = np.array([0.0, 0.0, -1.0])
D_STATE = np.array([1.0, 0.0, 0.0])
A_STATE = np.array([-1.0, 0.0, 0.0])
L_STATE = np.array([0.0, 1.0, 0.0])
R_STATE = np.array([0.0, -1.0, 0.0])

POCKELS_AXIS = D_STATE


class StageKind(Enum):
    HALF_WAVE = "hwp"
    QUARTER_WAVE = "qwp"
    POCKELS = "pc"


class PropagationDirection(Enum):
    FORWARD = 1
    BACKWARD = -1

    def flipped(self) -> "PropagationDirection":
        return PropagationDirection(-self.value)


NOMINAL_RETARDANCE = {StageKind.HALF_WAVE: 0.5, StageKind.QUARTER_WAVE: 0.25}


@dataclass(frozen=True)
class Convention:
    """Handedness choices; fixed once against known state mappings"""

    waveplate_sense: int = 1
    pockels_sense: int = -1
    axis_x_sign: int = 1


DEFAULT_CONVENTION = Convention()


@dataclass(frozen=True)
class OpticalStage:
    kind: StageKind
    angle_deg: float = 0.0
    retardance_waves: Optional[float] = None
    phases_deg: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind is StageKind.POCKELS and not self.phases_deg:
            raise InvalidArgumentError("A Pockels stage needs at least one phase setting")

    @property
    def retardance(self) -> float:
        """Retardance in radians"""
        waves = self.retardance_waves
        if waves is None:
            waves = NOMINAL_RETARDANCE.get(self.kind, 0.0)
        return 2.0 * np.pi * waves

    def axis(self, convention: Convention = DEFAULT_CONVENTION) -> np.ndarray:
        if self.kind is StageKind.POCKELS:
            return POCKELS_AXIS
        two_t = np.deg2rad(2.0 * self.angle_deg)
        return np.array([convention.axis_x_sign * np.sin(two_t), 0.0, -np.cos(two_t)])

    def rotation_angle(self, setting: int, sense: int, convention: Convention = DEFAULT_CONVENTION) -> float:
        if self.kind is StageKind.POCKELS:
            if not 1 <= setting <= len(self.phases_deg):
                raise InvalidArgumentError(
                    f"Setting {setting} not available; Pockels cell has {len(self.phases_deg)} phases"
                )
            return sense * convention.pockels_sense * np.deg2rad(self.phases_deg[setting - 1])
        return sense * convention.waveplate_sense * self.retardance

    def apply(self, state: np.ndarray, setting: int, sense: int, convention: Convention = DEFAULT_CONVENTION) -> np.ndarray:
        return rodrigues_rotate(state, self.axis(convention), self.rotation_angle(setting, sense, convention))


@dataclass(frozen=True)
class OpticalPipeline:
    """Stages listed in the order the light meets them in `direction`"""

    stages: Tuple[OpticalStage, ...]
    direction: PropagationDirection = PropagationDirection.FORWARD

    @property
    def settings(self) -> int:
        phases = [len(s.phases_deg) for s in self.stages if s.kind is StageKind.POCKELS]
        return max(phases) if phases else 1

    def reversed(self) -> "OpticalPipeline":
        return OpticalPipeline(tuple(reversed(self.stages)), self.direction.flipped())

    def waveplate_angles(self) -> List[float]:
        return [s.angle_deg for s in self.stages if s.kind is not StageKind.POCKELS]

    def with_waveplate_angles(self, angles: Sequence[float]) -> "OpticalPipeline":
        angles = list(angles)
        stages = []
        for stage in self.stages:
            if stage.kind is StageKind.POCKELS:
                stages.append(stage)
            else:
                stages.append(replace(stage, angle_deg=float(angles.pop(0))))
        return OpticalPipeline(tuple(stages), self.direction)


def propagate(pipeline: OpticalPipeline, state: VectorLike, setting: int = 1,
              convention: Convention = DEFAULT_CONVENTION) -> np.ndarray:
    """Send a Bloch vector through every stage of the pipeline"""
    v = as_vector(state)
    if np.linalg.norm(v) > 1.0 + UNIT_TOL:
        raise InvalidArgumentError(f"State has norm {np.linalg.norm(v):.6f} > 1")
    sense = pipeline.direction.value
    for stage in pipeline.stages:
        v = stage.apply(v, setting, sense, convention)
    return v


def measurement_pipeline(theta_deg: float = 120.0) -> OpticalPipeline:
    """
    Trusted party's fast-switching measurement, traced backward from the
    beam displacer's V port. Settings 1/2/3 select Pockels phases 0/+theta/-theta.
    """
    return OpticalPipeline(
        stages=(
            OpticalStage(StageKind.HALF_WAVE, -24.94),
            OpticalStage(StageKind.QUARTER_WAVE, -27.38),
            OpticalStage(StageKind.POCKELS, phases_deg=(0.0, theta_deg, -theta_deg)),
            OpticalStage(StageKind.QUARTER_WAVE, 62.62),
            OpticalStage(StageKind.HALF_WAVE, -24.94),
        ),
        direction=PropagationDirection.BACKWARD,
    )


MEASUREMENT_TARGETS = (V_STATE, D_STATE, L_STATE)


def mapping_deviation(pipeline: OpticalPipeline, start: VectorLike = V_STATE,
                      targets: Sequence[VectorLike] = MEASUREMENT_TARGETS,
                      convention: Convention = DEFAULT_CONVENTION) -> float:
    """Largest distance between propagated start state and each setting's target"""
    return max(
        float(np.linalg.norm(propagate(pipeline, start, j + 1, convention) - as_vector(t)))
        for j, t in enumerate(targets)
    )


def calibrate_convention(pipeline: OpticalPipeline, start: VectorLike = V_STATE,
                         targets: Sequence[VectorLike] = MEASUREMENT_TARGETS) -> Tuple[Convention, float]:
    """Pick the sign convention that best reproduces the known mappings"""
    best, best_dev = None, np.inf
    candidates = [DEFAULT_CONVENTION] + [
        Convention(w, p, x)
        for w, p, x in itertools.product((1, -1), (-1, 1), (1, -1))
        if Convention(w, p, x) != DEFAULT_CONVENTION
    ]
    for convention in candidates:
        dev = mapping_deviation(pipeline, start, targets, convention)
        if dev < best_dev - 1e-12:
            best, best_dev = convention, dev
    logger.debug("Calibrated convention %s (deviation %.3e)", best, best_dev)
    return best, best_dev


def refine_waveplate_angles(pipeline: OpticalPipeline, start: VectorLike = V_STATE,
                            targets: Sequence[VectorLike] = MEASUREMENT_TARGETS,
                            convention: Convention = DEFAULT_CONVENTION) -> Tuple[OpticalPipeline, float]:
    """
    Least-squares polish of the waveplate angles so that every setting maps
    `start` onto its target. Quoted angles are rounded to 0.01 degrees.
    """
    start = as_vector(start)
    targets = [as_vector(t) for t in targets]

    def residuals(angles):
        trial = pipeline.with_waveplate_angles(angles)
        return np.concatenate([propagate(trial, start, j + 1, convention) - t for j, t in enumerate(targets)])

    fit = least_squares(residuals, np.array(pipeline.waveplate_angles()), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    refined = pipeline.with_waveplate_angles(fit.x)
    deviation = mapping_deviation(refined, start, targets, convention)
    logger.info("Refined waveplate angles %s -> %s (deviation %.2e)",
                np.round(pipeline.waveplate_angles(), 4), np.round(fit.x, 6), deviation)
    return refined, deviation


# Polarizer (H) -> HWP -> QWP settings for the six tomography input states
PREPARATION_ANGLES: Dict[str, Tuple[float, float]] = {
    "H": (0.0, 0.0),
    "V": (45.0, 90.0),
    "D": (22.5, 45.0),
    "A": (-22.5, -45.0),
    "R": (0.0, -45.0),
    "L": (0.0, 45.0),
}


@dataclass(frozen=True)
class WaveplateError:
    """Manufacturing / mounting error of a single waveplate"""

    retardance_waves: float = 0.0
    angle_deg: float = 0.0


@dataclass(frozen=True)
class PreparationErrors:
    hwp: WaveplateError = field(default_factory=WaveplateError)
    qwp: WaveplateError = field(default_factory=WaveplateError)


def preparation_pipeline(label: str, errors: Optional[PreparationErrors] = None) -> OpticalPipeline:
    if label not in PREPARATION_ANGLES:
        raise InvalidArgumentError(f"Unknown preparation label {label!r}; expected one of {sorted(PREPARATION_ANGLES)}")
    errors = errors or PreparationErrors()
    hwp_angle, qwp_angle = PREPARATION_ANGLES[label]
    return OpticalPipeline(
        stages=(
            OpticalStage(StageKind.HALF_WAVE, hwp_angle + errors.hwp.angle_deg,
                         retardance_waves=0.5 + errors.hwp.retardance_waves),
            OpticalStage(StageKind.QUARTER_WAVE, qwp_angle + errors.qwp.angle_deg,
                         retardance_waves=0.25 + errors.qwp.retardance_waves),
        ),
        direction=PropagationDirection.FORWARD,
    )


def preparation_state(label: str, errors: Optional[PreparationErrors] = None) -> np.ndarray:
    """Input state produced by the horizontal polarizer and the label's waveplates"""
    return propagate(preparation_pipeline(label, errors), H_STATE)
