import numpy as np
import pytest

from src.calibration.efficiency import (
    CalibrationModel,
    RateTable,
    allan_curve,
    allan_deviation,
    alice_efficiencies,
    average_rates,
    bias_study,
    bob_efficiencies,
    bob_ratio,
    calibration_rates,
    conservative_ratio,
    estimate_efficiencies,
    forward_rates,
    optimal_window,
    ratio_sigma,
    ratio_uncertainty_resampled,
    sample_calibration_counts,
    windowed_ratios,
)
from src.utils.errors import IllConditionedError, InsufficientDataError, InvalidArgumentError

ALPHA = np.array([[0.81, 0.77]])
BETA = np.array([[0.80, 0.69]])
JOINT = np.array([[[[0.08, 0.42], [0.40, 0.10]]]])


def lab_table(pair_rate=1e5):
    return forward_rates(ALPHA, BETA, JOINT, pair_rate)


def test_inversion_recovers_efficiencies():
    rates = lab_table()
    assert bob_efficiencies(rates, 1, 1) == pytest.approx((0.80, 0.69), abs=1e-12)
    assert alice_efficiencies(rates, 1, 1) == pytest.approx((0.81, 0.77), abs=1e-12)
    assert bob_ratio(rates, 1) == pytest.approx(0.80 / 0.69, abs=1e-12)


def test_inversion_identity_on_random_inputs():
    rng = np.random.default_rng(0)
    checked = 0
    for _ in range(1000):
        alpha = rng.uniform(0.2, 1.0, (1, 2))
        beta = rng.uniform(0.2, 1.0, (1, 2))
        p = rng.dirichlet(np.ones(4)).reshape(1, 1, 2, 2)
        rates = forward_rates(alpha, beta, p, 1e4)
        try:
            est = estimate_efficiencies(rates)
        except IllConditionedError:
            continue
        det = abs(p[0, 0, 0, 1] * p[0, 0, 1, 0] - p[0, 0, 0, 0] * p[0, 0, 1, 1])
        if det < 1e-3:
            continue
        checked += 1
        assert np.allclose(est.bob[0], beta[0], rtol=1e-10)
        assert np.allclose(est.alice[0], alpha[0], rtol=1e-10)
    assert checked > 800


def test_product_distribution_is_ill_conditioned():
    rates = forward_rates(ALPHA, BETA, np.full((1, 1, 2, 2), 0.25), 1e5)
    with pytest.raises(IllConditionedError) as info:
        bob_ratio(rates, 1)
    assert info.value.condition_number > 1e9


def test_rate_table_validation():
    with pytest.raises(InvalidArgumentError):
        RateTable(np.zeros((1, 1, 2, 3)), np.zeros((1, 1, 2)), np.zeros((1, 1, 2)))
    with pytest.raises(InvalidArgumentError):
        RateTable(-np.ones((1, 1, 2, 2)), np.zeros((1, 1, 2)), np.zeros((1, 1, 2)))
    with pytest.raises(InvalidArgumentError):
        lab_table()._pair(2, 1)


def test_propagated_error_matches_resampling():
    rates = lab_table()
    propagated = ratio_sigma(rates, 1, duration=10.0)
    resampled = ratio_uncertainty_resampled(rates, 1, duration=10.0, draws=1500, seed=4)
    assert propagated == pytest.approx(resampled, rel=0.1)


def test_estimate_rows_carry_error_bars_with_duration():
    rows = estimate_efficiencies(lab_table(), duration=10.0).rows()
    assert rows[0]["ratio"] == pytest.approx(0.80 / 0.69)
    assert rows[0]["ratio_sigma"] > 0
    assert "ratio_sigma" not in estimate_efficiencies(lab_table()).rows()[0]
    with pytest.raises(InvalidArgumentError):
        estimate_efficiencies(lab_table(), duration=0.0)


def test_allan_deviation():
    assert allan_deviation([1, 3, 1, 3], 1) == pytest.approx(np.sqrt(2))
    assert allan_deviation([1, 3, 1, 3], 2) == pytest.approx(0.0)
    assert optimal_window([1, 3, 1, 3]) == 2
    assert [w for w, _ in allan_curve([1, 3, 1, 3, 1, 3])] == [1, 2, 3]
    with pytest.raises(InsufficientDataError):
        allan_deviation([1, 2, 3], 2)


def test_windowed_ratios_on_a_stable_source():
    series = [lab_table() for _ in range(6)]
    values, errors = windowed_ratios(series, 1, 2, duration=1.0)
    assert values.shape == errors.shape == (3,)
    assert np.allclose(values, 0.80 / 0.69)
    assert errors[0] == pytest.approx(ratio_sigma(average_rates(series[:2]), 1, 2.0))


def test_conservative_ratio_takes_the_worst_window():
    values = [1.1657, 1.1435, 1.1666]
    assert conservative_ratio(values, 0.0054) == pytest.approx(1.1435 * 0.98 - 5 * 0.0054)
    with pytest.raises(InsufficientDataError):
        conservative_ratio([], [])
    with pytest.raises(InvalidArgumentError):
        conservative_ratio(values, 0.0054, pdl=1.2)


def test_bias_from_background_and_multipairs():
    report = bias_study(background_rate=200.0, pair_prob=0.0072)
    assert report.true_ratio == pytest.approx(0.80 / 0.69)
    assert np.all(report.bias < 0)
    assert np.all((2e-4 <= -report.relative_error) & (-report.relative_error <= 2e-3))


def test_ideal_source_is_unbiased():
    report = bias_study(background_rate=0.0, pair_prob=1e-6)
    assert report.worst_relative_error < 1e-4


def test_coupling_loss_biases_only_the_rectilinear_basis():
    x = 0.02
    report = bias_study(background_rate=0.0, pair_prob=1e-6, pdl_fraction=x)
    assert report.relative_error[0] == pytest.approx(x / (1 - x), abs=1e-4)
    assert abs(report.relative_error[1]) < 1e-4
    assert abs(report.relative_error[2]) < 1e-4


def test_monte_carlo_counts_agree_with_exact_rates():
    model = CalibrationModel(pair_probability=0.01, background_rate=2000.0)
    pulses = 2_000_000
    counts = sample_calibration_counts(model, pulses, seed=9, block=500_000)
    exact = calibration_rates(model).scaled(pulses / model.trials)
    for drawn, expected in ((counts.coincidences, exact.coincidences), (counts.alice_singles, exact.alice_singles),
                            (counts.bob_singles, exact.bob_singles)):
        assert np.all(np.abs(drawn - expected) <= 5 * np.sqrt(expected) + 1)
    again = sample_calibration_counts(model, pulses, seed=9, block=500_000)
    assert np.array_equal(counts.coincidences, again.coincidences)


def test_calibration_model_validation():
    with pytest.raises(InvalidArgumentError):
        CalibrationModel(pdl_fraction=1.0)
    with pytest.raises(InvalidArgumentError):
        CalibrationModel(background_rate=-1.0)
