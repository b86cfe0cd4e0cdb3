import itertools

import numpy as np
import pytest

from src.bounds.presets import measured
from src.bounds.strategies import MeasurementSet, steering_bound
from src.calibration.conservative import (
    rotate_pair,
    worst_case_no_message,
    worst_case_one_bit,
    worst_case_one_bit_exhaustive,
)
from src.geometry.bloch import angle_between
from src.utils.errors import DegenerateGeometryError, InvalidArgumentError

K_SIGMA = 5.0


def test_no_message_rotation_reproduces_lab_table():
    result = worst_case_no_message(measured(), K_SIGMA)
    assert result.signs == (-1, 1, 1)
    expected = [
        [0.0913, -0.0024, -0.9958],
        [0.9942, 0.0943, -0.0508],
        [0.1424, 0.9875, -0.0671],
    ]
    assert np.allclose(result.measurement.axes, expected, atol=1e-3)


def test_one_bit_rotation_reproduces_lab_table():
    result = worst_case_one_bit(measured(), K_SIGMA)
    assert result.members == (1, 2)
    expected = [
        [-0.0502, 0.0419, 0.9978],
        [0.9936, 0.1127, -0.0104],
        [0.1584, 0.9869, -0.0278],
    ]
    assert np.allclose(result.measurement.axes, expected, atol=1e-3)


def test_each_axis_moves_by_at_most_k_sigma():
    meas = measured()
    for adjust in (worst_case_no_message, worst_case_one_bit):
        result = adjust(meas, K_SIGMA)
        signed = meas.axes * np.array(result.signs)[:, None]
        for before, after, sigma in zip(signed, result.measurement.axes, meas.sigmas):
            assert angle_between(before, after) <= K_SIGMA * sigma + 1e-9


def _perturbed_sets(count=100, scale=0.02, seed=3):
    rng = np.random.default_rng(seed)
    base = measured()
    for _ in range(count):
        yield MeasurementSet.from_estimates(base.axes + rng.normal(0, scale, base.axes.shape), base.sigmas)


def test_no_message_rotation_never_lowers_the_bound():
    for meas in _perturbed_sets():
        rotated = worst_case_no_message(meas, K_SIGMA).measurement
        assert steering_bound(rotated, 1, 0.0).h >= steering_bound(meas, 1, 0.0).h - 1e-12


def test_one_bit_rotation_never_lowers_the_bound():
    for meas in _perturbed_sets():
        rotated = worst_case_one_bit(meas, K_SIGMA).measurement
        for r in (0.0, 0.593):
            assert steering_bound(rotated, 2, r).h >= steering_bound(meas, 2, r).h - 1e-12


def test_exhaustive_search_is_at_least_as_conservative():
    meas = measured()
    heuristic = worst_case_one_bit(meas, K_SIGMA).measurement
    exhaustive = worst_case_one_bit_exhaustive(meas, K_SIGMA, 0.593).measurement
    assert steering_bound(exhaustive, 2, 0.593).h >= steering_bound(heuristic, 2, 0.593).h - 1e-12


def test_zero_sigma_leaves_axes_unchanged_up_to_sign():
    result = worst_case_no_message(MeasurementSet.octahedral(), K_SIGMA)
    assert np.allclose(np.abs(result.measurement.axes), np.abs(MeasurementSet.octahedral().axes))


def test_negative_k_sigma_rejected():
    with pytest.raises(InvalidArgumentError):
        worst_case_no_message(measured(), -1.0)
    with pytest.raises(InvalidArgumentError):
        worst_case_one_bit(measured(), -1.0)


@pytest.mark.parametrize("adjust", [worst_case_no_message, worst_case_one_bit])
def test_relabelling_settings_relabels_the_result(adjust):
    base = measured()
    reference = adjust(base, K_SIGMA)
    for order in itertools.permutations(range(3)):
        result = adjust(base.permuted(order), K_SIGMA)
        assert np.allclose(result.measurement.axes, reference.measurement.axes[list(order)], atol=1e-12)
        assert result.signs == tuple(reference.signs[j] for j in order)


def test_identical_axes_are_already_at_their_mean():
    axis = [0.1, 0.2, 0.97]
    meas = MeasurementSet.from_estimates([axis] * 3, [0.0114] * 3)
    for adjust in (worst_case_no_message, worst_case_one_bit):
        result = adjust(meas, K_SIGMA)
        assert result.signs == (1, 1, 1)
        assert np.allclose(result.measurement.axes, meas.axes, atol=1e-12)


def test_zero_k_sigma_keeps_the_signed_axes():
    meas = measured()
    for adjust in (worst_case_no_message, worst_case_one_bit):
        result = adjust(meas, 0.0)
        assert np.allclose(result.measurement.axes, meas.axes * np.array(result.signs)[:, None], atol=1e-12)


def test_antiparallel_pair_has_no_common_direction():
    meas = MeasurementSet([[0, 0, 1], [0, 0, -1], [1, 0, 0]], [0.01] * 3)
    with pytest.raises(DegenerateGeometryError):
        rotate_pair(meas, (0, 1), (1, 1), K_SIGMA)
    flipped = rotate_pair(meas, (0, 1), (1, -1), K_SIGMA)
    assert np.allclose(flipped.measurement.axes[1], [0, 0, 1])
