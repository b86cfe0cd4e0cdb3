import itertools
from math import sqrt

import numpy as np
import pytest

from src.bounds.presets import MEASURED_AXES, PRESETS, measured, preset
from src.bounds.strategies import (
    CheatStrategy,
    MeasurementSet,
    StrategySpace,
    bound_lines,
    steering_bound,
    strategy_value,
)
from src.geometry.bloch import normalize, rodrigues_matrix
from src.utils.errors import InvalidArgumentError

OCTAHEDRAL = MeasurementSet.octahedral()


@pytest.mark.parametrize("d, r, expected", [
    (1, 0.0, sqrt(3) / 3),
    (1, sqrt(2) - 1, (2 - sqrt(2)) / 3),
    (1, sqrt(3) - sqrt(2), (3 * sqrt(2) - 2 * sqrt(3)) / 3),
    (2, 0.0, (1 + sqrt(2)) / 3),
    (2, sqrt(2) - 1, (4 - 2 * sqrt(2)) / 3),
])
def test_octahedral_bounds(d, r, expected):
    assert steering_bound(OCTAHEDRAL, d, r).h == pytest.approx(expected, abs=1e-12)


def test_bound_at_full_rate_is_zero():
    for d in (1, 2):
        assert steering_bound(OCTAHEDRAL, d, 1.0).h == pytest.approx(0.0, abs=1e-12)


def test_pruning_keeps_the_optimum_and_the_tie_break():
    for meas, d in itertools.product((OCTAHEDRAL, measured()), (1, 2)):
        for r in (0.0, 0.2, sqrt(2) - 1, 0.7):
            pruned = steering_bound(meas, d, r)
            full = steering_bound(meas, d, r, prune=False)
            assert pruned.h == pytest.approx(full.h, abs=1e-12)
            assert pruned.strategy == full.strategy


def test_reported_strategy_attains_the_bound():
    result = steering_bound(measured(), 2, 0.3)
    value, ensemble = strategy_value(result.strategy, measured(), 0.3)
    assert value == pytest.approx(result.h, abs=1e-15)
    assert len(ensemble.states) == 2


def test_more_messages_never_lower_the_bound():
    for r in np.linspace(0, 1, 11):
        assert steering_bound(OCTAHEDRAL, 2, r).h >= steering_bound(OCTAHEDRAL, 1, r).h - 1e-12


def test_bound_is_nonincreasing_in_r():
    values = [steering_bound(measured(), 1, r).h for r in np.linspace(0, 1, 21)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_bound_is_invariant_under_relabelling_settings():
    base = measured()
    for order in itertools.permutations(range(3)):
        assert steering_bound(base.permuted(order), 2, 0.25).h == pytest.approx(
            steering_bound(base, 2, 0.25).h, abs=1e-12)


def test_envelope_lines_reproduce_the_bound():
    lines = bound_lines(OCTAHEDRAL, 1)
    assert [line.m for line in lines] == [0, 1, 2, 3]
    for r in (0.0, 0.3, 0.8):
        envelope = max(line.intercept - r * line.m / 3 for line in lines)
        assert envelope == pytest.approx(steering_bound(OCTAHEDRAL, 1, r).h, abs=1e-12)


def test_space_iterates_in_lexicographic_order():
    space = StrategySpace(OCTAHEDRAL, 1)
    strategies = list(space)
    assert len(strategies) == space.size == 14
    assert strategies[0].alpha == (-1, -1, -1)
    assert strategies == sorted(strategies, key=lambda s: (s.alpha, s.ell))


@pytest.mark.parametrize("d", [0, 3, 4])
def test_alphabet_validation(d):
    with pytest.raises(InvalidArgumentError):
        steering_bound(OCTAHEDRAL, d, 0.0)


@pytest.mark.parametrize("r", [-0.1, 1.1, float("nan")])
def test_rate_validation(r):
    with pytest.raises(InvalidArgumentError):
        steering_bound(OCTAHEDRAL, 1, r)


def test_measurement_set_validation():
    with pytest.raises(InvalidArgumentError):
        MeasurementSet([[1, 0, 0]])
    with pytest.raises(InvalidArgumentError):
        MeasurementSet([[1, 0, 0], [0, 2, 0]])
    with pytest.raises(InvalidArgumentError):
        MeasurementSet(np.eye(3), sigmas=[0.1, -0.1, 0.1])


def test_strategy_validation():
    with pytest.raises(InvalidArgumentError):
        CheatStrategy((1, 2, 0), (1, 1, 1), 1)
    with pytest.raises(InvalidArgumentError):
        CheatStrategy((1, 0, 0), (1, 3, 1), 2)


def test_presets():
    assert set(PRESETS) == {"octahedral", "measured", "measured-conservative-h0", "measured-conservative-h1"}
    meas = preset("measured")
    assert np.allclose(meas.axes, MEASURED_AXES, atol=1e-3)
    assert np.allclose(meas.sigmas, 0.0114)
    with pytest.raises(InvalidArgumentError):
        preset("tetrahedral")


def test_asymmetric_sets_warn_but_still_bound(caplog):
    assert MeasurementSet.octahedral().is_symmetric()
    assert not measured().is_symmetric()
    with caplog.at_level("WARNING"):
        StrategySpace(MeasurementSet.octahedral(), 1)
    assert "rotation-symmetric" not in caplog.text
    with caplog.at_level("WARNING"):
        result = steering_bound(measured(), 1, 0.5)
    assert "rotation-symmetric" in caplog.text
    assert 0.0 < result.h < 1.0


def sphere_grid(points=2562):
    """Near-uniform Fibonacci lattice on the unit sphere"""
    i = np.arange(points) + 0.5
    polar = np.arccos(1 - 2 * i / points)
    azimuth = np.pi * (1 + 5 ** 0.5) * i
    return np.column_stack([np.cos(azimuth) * np.sin(polar), np.sin(azimuth) * np.sin(polar), np.cos(polar)])


def grid_bound(meas, d, r, grid):
    """Brute force over every (alpha, ell) with the ensemble states restricted to the grid"""
    best = -np.inf
    for alpha in itertools.product((-1, 0, 1), repeat=meas.n):
        signed = np.array(alpha)[:, None] * meas.axes
        m = sum(1 for a in alpha if a != 0)
        for ell in itertools.product(range(d), repeat=meas.n):
            labels = np.array(ell)
            total = sum((grid @ signed[labels == g].sum(axis=0)).max() for g in range(d))
            best = max(best, (total - r * m) / meas.n)
    return best


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("r", [0.0, 0.35, 0.8])
def test_bound_agrees_with_a_sphere_grid(d, r):
    grid = sphere_grid()
    for meas in (OCTAHEDRAL, measured()):
        exact = steering_bound(meas, d, r).h
        approx = grid_bound(meas, d, r, grid)
        assert approx <= exact + 1e-12
        assert exact - approx < 5e-3


def test_bound_ignores_axis_sign_flips():
    base = measured()
    for signs in itertools.product((1, -1), repeat=3):
        flipped = MeasurementSet(base.axes * np.array(signs)[:, None], base.sigmas)
        for d in (1, 2):
            assert steering_bound(flipped, d, 0.3).h == pytest.approx(steering_bound(base, d, 0.3).h, abs=1e-12)


def test_bound_ignores_a_common_rotation():
    base = measured()
    rotation = rodrigues_matrix(normalize([0.3, -1.0, 0.4]), 1.1)
    rotated = MeasurementSet(base.axes @ rotation.T, base.sigmas)
    for d in (1, 2):
        for r in (0.0, 0.45, 1.0):
            assert steering_bound(rotated, d, r).h == pytest.approx(steering_bound(base, d, r).h, abs=1e-12)
