import numpy as np
import pytest

from src.bounds.optimize import optimal_gain
from src.bounds.presets import measured, preset
from src.bounds.strategies import MeasurementSet
from src.experiment.estimator import bootstrap_standard_error, estimate
from src.experiment.simulator import ExperimentConfig, TrialCounts, joint_outcome_distribution, simulate
from src.experiment.spacetime import EVENT_DISTANCE_M, MESSAGE_WINDOW_S, ftl_speed
from src.utils.errors import InsufficientDataError, InvalidArgumentError

ETA = 0.748


def lab_config(mu, trials=10**7, seed=0, **kwargs):
    return ExperimentConfig.aligned(mu, measured(), ETA, (1.0, 1.0), trials, seed=seed, **kwargs)


def test_outcome_distribution_is_normalized():
    config = ExperimentConfig.aligned(0.9, MeasurementSet.octahedral(), [[0.7, 0.6]] * 3, [[0.8, 0.69]] * 3,
                                      10, dark_count=0.01)
    for k in (1, 2, 3):
        for j in (1, 2, 3):
            dist = joint_outcome_distribution(config, k, j)
            assert dist.sum() == pytest.approx(1.0, abs=1e-14)
            assert np.all(dist >= 0)


def test_untrusted_double_click_is_a_null_result():
    config = ExperimentConfig.aligned(1.0, MeasurementSet.octahedral(), 1.0, 1.0, 10, dark_count=0.1)
    dist = joint_outcome_distribution(config, 1, 1)
    assert dist[1].sum() == pytest.approx(0.1)


def test_trusted_double_click_is_a_coin_flip():
    config = ExperimentConfig.aligned(1.0, MeasurementSet.octahedral(), 1.0, 1.0, 10, dark_count=0.1)
    dist = joint_outcome_distribution(config, 1, 1)
    assert dist[:, 2].sum() == pytest.approx(0.0)
    # matched settings, mu = 1: the trusted outcome only flips through a coin on a double click
    agree = dist[0, 0] + dist[2, 1]
    disagree = dist[0, 1] + dist[2, 0]
    assert agree / (agree + disagree) == pytest.approx(0.95)


def test_simulation_is_reproducible():
    first = simulate(lab_config(0.95, trials=1000, seed=7))
    second = simulate(lab_config(0.95, trials=1000, seed=7))
    assert np.array_equal(first.counts, second.counts)
    assert first.totals().tolist() == [[1000] * 3] * 3


def test_zero_trials_give_empty_counts():
    for random_settings in (False, True):
        counts = simulate(lab_config(0.9, trials=0, seed=4, random_settings=random_settings))
        assert counts.counts.shape == (3, 3, 3, 3)
        assert counts.counts.sum() == 0
    with pytest.raises(InsufficientDataError):
        estimate(counts, np.ones(3), 0.3)
    with pytest.raises(InvalidArgumentError):
        lab_config(0.9, trials=-1)


def test_random_settings_spread_trials_over_pairs():
    counts = simulate(lab_config(0.95, trials=1000, seed=3, random_settings=True))
    assert counts.counts.sum() == 9000
    assert len(set(counts.totals().ravel().tolist())) > 1


def test_counts_frame_keeps_null_columns():
    counts = simulate(lab_config(0.9, trials=500, seed=1))
    frame = counts.to_frame()
    assert set(frame["b"]) == {1, -1, 0}
    assert set(frame["a"]) == {1, 0, -1}
    assert np.array_equal(TrialCounts.from_frame(frame).counts, counts.counts)
    assert counts.get(0, 1, 2, 2) == counts.matched(2)[1, 0]


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        lab_config(1.2)
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.aligned(0.9, measured(), 1.5, 1.0, 10)
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.aligned(0.9, measured(), 0.7, 1.0, 10, dark_count=1.0)


def test_score_matches_the_werner_expectation():
    r = 0.4
    report = estimate(simulate(lab_config(0.97, seed=2)), np.ones(3), r)
    assert report.residual is None
    assert report.heralding_efficiency == pytest.approx(ETA, abs=5e-4)
    assert report.score == pytest.approx(ETA * (0.97 - r), abs=5 * report.standard_error)
    assert 3e-5 < report.standard_error < 2e-4


@pytest.mark.parametrize("mu, d, positive", [(0.99, 1, True), (0.99, 2, True), (0.93, 2, False)])
def test_residual_sign_at_five_standard_errors(mu, d, positive):
    meas = preset("measured-conservative-h0" if d == 1 else "measured-conservative-h1")
    optimum = optimal_gain(meas, d, ETA)
    report = estimate(simulate(lab_config(mu, seed=d)), np.ones(3), optimum.r, optimum.h)
    if positive:
        assert report.significance > 5
    else:
        assert report.significance < -5


def test_bootstrap_error_agrees_with_propagation():
    counts = simulate(lab_config(0.95, trials=100_000, seed=5))
    report = estimate(counts, np.ones(3), 0.5)
    bootstrap = bootstrap_standard_error(counts, np.ones(3), 0.5, draws=300, seed=1)
    assert bootstrap == pytest.approx(report.standard_error, rel=0.25)


def test_estimator_validation():
    counts = simulate(lab_config(0.9, trials=100, seed=1))
    with pytest.raises(InvalidArgumentError):
        estimate(counts, np.ones(2), 0.3)
    with pytest.raises(InvalidArgumentError):
        estimate(counts, [1.0, -1.0, 1.0], 0.3)
    with pytest.raises(InvalidArgumentError):
        estimate(counts, np.ones(3), 1.5)
    with pytest.raises(InsufficientDataError):
        estimate(TrialCounts(np.zeros((3, 3, 3, 3))), np.ones(3), 0.3)


def test_signalling_speed_of_the_lab_geometry():
    bound = ftl_speed(EVENT_DISTANCE_M, MESSAGE_WINDOW_S)
    assert bound.speed == pytest.approx(7.013e8, rel=1e-3)
    assert bound.speed_over_c == pytest.approx(2.339, abs=1e-3)
    assert bound.to_dict()["speed_m_s"] == bound.speed


@pytest.mark.parametrize("distance, time", [(10.0, 0.0), (10.0, -1e-9), (-1.0, 1e-9)])
def test_signalling_speed_validation(distance, time):
    with pytest.raises(InvalidArgumentError):
        ftl_speed(distance, time)


def swap_outcomes(counts: TrialCounts) -> TrialCounts:
    # +1 <-> -1 on both sides; the null rows and columns stay put
    return TrialCounts(counts.counts[:, :, ::-1, :][:, :, :, [1, 0, 2]])


def test_score_is_symmetric_under_a_joint_outcome_swap():
    counts = simulate(lab_config(0.9, trials=50_000, seed=11))
    report = estimate(counts, np.ones(3), 0.45)
    swapped = estimate(swap_outcomes(counts), np.ones(3), 0.45)
    assert swapped.score == pytest.approx(report.score, abs=1e-12)
    assert np.allclose(swapped.correlators, report.correlators, atol=1e-12)


def test_score_is_invariant_under_count_scaling():
    counts = simulate(lab_config(0.9, trials=50_000, seed=12))
    ratios = [1.1, 0.9, 1.2]
    report = estimate(counts, ratios, 0.45)
    tripled = estimate(TrialCounts(counts.counts * 3), ratios, 0.45)
    assert tripled.score == pytest.approx(report.score, abs=1e-12)
    assert tripled.heralding_efficiency == pytest.approx(report.heralding_efficiency, abs=1e-12)


def test_unit_ratios_match_the_raw_count_estimator():
    counts = simulate(lab_config(0.93, trials=20_000, seed=13))
    r = 0.3
    raw = []
    for j in (1, 2, 3):
        m = counts.matched(j)[:, :2].astype(float)
        correlator = (m[0, 0] - m[0, 1] - m[2, 0] + m[2, 1]) / m.sum()
        detection = (m[0].sum() + m[2].sum()) / m.sum()
        raw.append(correlator - r * detection)
    assert estimate(counts, np.ones(3), r).score == pytest.approx(np.mean(raw), abs=1e-14)


def test_unequal_trusted_efficiencies_are_corrected_by_their_ratio():
    beta = (0.8, 0.69)
    counts = simulate(ExperimentConfig.aligned(0.97, measured(), ETA, beta, 10**7, seed=14))
    r = 0.4
    report = estimate(counts, [beta[0] / beta[1]] * 3, r)
    assert report.heralding_efficiency == pytest.approx(ETA, abs=5e-4)
    assert report.score == pytest.approx(ETA * (0.97 - r), abs=5 * report.standard_error)


def test_uncorrelated_state_scores_minus_r():
    counts = simulate(ExperimentConfig.aligned(0.0, MeasurementSet.octahedral(), 1.0, 1.0, 10**6, seed=15))
    report = estimate(counts, np.ones(3), 0.5)
    assert np.allclose(report.detection_rates, 1.0)
    assert report.score == pytest.approx(-0.5, abs=5 * report.standard_error)


def test_ideal_state_reaches_the_tsirelson_residual():
    counts = simulate(ExperimentConfig.aligned(1.0, MeasurementSet.octahedral(), 1.0, 1.0, 10_000, seed=16))
    report = estimate(counts, np.ones(3), 0.0, h=np.sqrt(3) / 3)
    assert report.score == pytest.approx(1.0)
    assert report.residual == pytest.approx((3 - np.sqrt(3)) / 3)


def test_purity_at_the_threshold_leaves_no_residual():
    meas = preset("measured-conservative-h1")
    optimum = optimal_gain(meas, 2, ETA)
    assert optimum.mu_min == pytest.approx(0.9557, abs=1e-3)
    report = estimate(simulate(lab_config(optimum.mu_min, seed=17)), np.ones(3), optimum.r, optimum.h)
    assert abs(report.significance) < 3
