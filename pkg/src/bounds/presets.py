"""
Named measurement sets for the CLI and campaign configs.
"""
from typing import Callable, Dict

import numpy as np

from ..utils.errors import InvalidArgumentError
from .strategies import MeasurementSet

# Tomographic estimate of the fast-switching measurement (settings 1..3)
MEASURED_AXES = np.array([
    [-0.0502, 0.0419, 0.9978],
    [0.9984, 0.0559, -0.0089],
    [0.1019, 0.9944, -0.0276],
])
MEASURED_SIGMA = 0.0114


def measured() -> MeasurementSet:
    return MeasurementSet.from_estimates(MEASURED_AXES, np.full(3, MEASURED_SIGMA))


def _conservative(bits: int, k_sigma: float = 5.0) -> MeasurementSet:
    from ..calibration.conservative import worst_case_no_message, worst_case_one_bit

    adjust = worst_case_no_message if bits == 0 else worst_case_one_bit
    return adjust(measured(), k_sigma).measurement


PRESETS: Dict[str, Callable[[], MeasurementSet]] = {
    "octahedral": MeasurementSet.octahedral,
    "measured": measured,
    "measured-conservative-h0": lambda: _conservative(0),
    "measured-conservative-h1": lambda: _conservative(1),
}


def preset(name: str) -> MeasurementSet:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise InvalidArgumentError(f"Unknown measurement preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory()
