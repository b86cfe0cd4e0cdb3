from .conservative import ConservativeResult, rotate_pair, worst_case_no_message, worst_case_one_bit
from .efficiency import (
    EfficiencyEstimate,
    RateTable,
    alice_efficiencies,
    allan_deviation,
    bias_study,
    bob_efficiencies,
    bob_ratio,
    forward_rates,
)
from .tomography import ProbeRecord, TomographyEstimate, bootstrap_tomography, fit_measurement_axis, parametric_resample

__all__ = [
    "ConservativeResult",
    "rotate_pair",
    "worst_case_no_message",
    "worst_case_one_bit",
    "EfficiencyEstimate",
    "RateTable",
    "alice_efficiencies",
    "allan_deviation",
    "bias_study",
    "bob_efficiencies",
    "bob_ratio",
    "forward_rates",
    "ProbeRecord",
    "TomographyEstimate",
    "bootstrap_tomography",
    "fit_measurement_axis",
    "parametric_resample",
]
