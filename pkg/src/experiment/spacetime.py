from dataclasses import dataclass

from scipy.constants import c as SPEED_OF_LIGHT

from ..utils.errors import InvalidArgumentError

# Lab-frame separation and message window of the fast-switching run
EVENT_DISTANCE_M = 161.3
MESSAGE_WINDOW_S = 230e-9
QUOTED_SPEED_M_S = 9.84e8


@dataclass(frozen=True)
class SpacetimeBound:
    distance_m: float
    time_s: float

    @property
    def speed(self) -> float:
        return self.distance_m / self.time_s

    @property
    def speed_over_c(self) -> float:
        return self.speed / SPEED_OF_LIGHT

    def to_dict(self):
        return {
            "distance_m": self.distance_m,
            "time_s": self.time_s,
            "speed_m_s": self.speed,
            "speed_over_c": self.speed_over_c,
        }


def ftl_speed(distance_m: float, time_s: float) -> SpacetimeBound:
    """Minimum signalling speed needed to carry a message across the separation in time"""
    if time_s <= 0:
        raise InvalidArgumentError(f"Elapsed time must be positive, got {time_s}")
    if distance_m < 0:
        raise InvalidArgumentError(f"Distance must be non-negative, got {distance_m}")
    return SpacetimeBound(float(distance_m), float(time_s))
