"""
Worst-case adjustment of a measured axis set.

Each axis is only known to within k standard deviations, so the cheating
party may assume the axes sit closer together than measured. Without a
message the whole set is pulled toward the mean of its best signed
combination; with one bit only the closest signed pair is pulled together.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..bounds.strategies import MeasurementSet, steering_bound
from ..geometry.bloch import ZERO_TOL, rotate_toward
from ..utils.errors import DegenerateGeometryError, InvalidArgumentError

logger = logging.getLogger(__name__)

RANK_TOL = 1e-12


@dataclass
class ConservativeResult:
    measurement: MeasurementSet
    signs: Tuple[int, ...]
    members: Tuple[int, ...]
    target: np.ndarray
    k_sigma: float

    def to_dict(self):
        return {
            "axes": self.measurement.axes.tolist(),
            "sigmas": self.measurement.sigmas.tolist(),
            "signs": list(self.signs),
            "members": list(self.members),
            "target": self.target.tolist(),
            "k_sigma": self.k_sigma,
        }


def _check_k(k_sigma: float):
    if k_sigma < 0 or not np.isfinite(k_sigma):
        raise InvalidArgumentError(f"k_sigma must be a non-negative number, got {k_sigma}")


def _beats(key: Sequence[float], best: Optional[Sequence[float]]) -> bool:
    """Lexicographic comparison with a tolerance on the float entries"""
    if best is None:
        return True
    for a, b in zip(key, best):
        if a > b + RANK_TOL:
            return True
        if a < b - RANK_TOL:
            return False
    return False


def _rotate_members(meas: MeasurementSet, signs: Sequence[int], members: Sequence[int],
                    target: np.ndarray, k_sigma: float) -> MeasurementSet:
    axes = meas.axes * np.asarray(signs, dtype=float)[:, None]
    for j in members:
        axes[j] = rotate_toward(axes[j], target, k_sigma * meas.sigmas[j])
    return MeasurementSet.from_estimates(axes, meas.sigmas.copy())


def worst_case_no_message(meas: MeasurementSet, k_sigma: float) -> ConservativeResult:
    """
    Rotate every axis toward the mean of the signed combination whose members
    are all closest to that mean (max of the minimum inner product).
    """
    _check_k(k_sigma)
    best_key, best = None, None
    for signs in itertools.product((1, -1), repeat=meas.n):
        signed = meas.axes * np.asarray(signs, dtype=float)[:, None]
        total = signed.sum(axis=0)
        norm = np.linalg.norm(total)
        if norm < ZERO_TOL:
            continue
        mean = total / norm
        inner = signed @ mean
        key = (float(inner.min()), float(inner.sum()), sum(1 for s in signs if s > 0))
        if _beats(key, best_key):
            best_key, best = key, (signs, mean)

    if best is None:
        raise DegenerateGeometryError("Every signed combination of the axes sums to zero")

    signs, mean = best
    members = tuple(range(meas.n))
    logger.debug("No-message worst case: signs %s, min inner product %.6f", signs, best_key[0])
    return ConservativeResult(_rotate_members(meas, signs, members, mean, k_sigma),
                              tuple(signs), members, mean, float(k_sigma))


def _pair_candidates(meas: MeasurementSet) -> List[Tuple[Tuple[int, int], Tuple[int, int], float]]:
    candidates = []
    for u, v in itertools.combinations(range(meas.n), 2):
        for su, sv in itertools.product((1, -1), repeat=2):
            candidates.append(((u, v), (su, sv), float(su * sv * meas.axes[u] @ meas.axes[v])))
    return candidates


def rotate_pair(meas: MeasurementSet, pair: Tuple[int, int], pair_signs: Tuple[int, int],
                k_sigma: float) -> ConservativeResult:
    """Rotate the two signed members of `pair` toward their common mean"""
    _check_k(k_sigma)
    signs = [1] * meas.n
    signs[pair[0]], signs[pair[1]] = pair_signs
    total = pair_signs[0] * meas.axes[pair[0]] + pair_signs[1] * meas.axes[pair[1]]
    norm = np.linalg.norm(total)
    if norm < ZERO_TOL:
        raise DegenerateGeometryError(f"Settings {pair} are antiparallel; no common direction")
    mean = total / norm
    return ConservativeResult(_rotate_members(meas, signs, pair, mean, k_sigma),
                              tuple(signs), tuple(pair), mean, float(k_sigma))


def worst_case_one_bit(meas: MeasurementSet, k_sigma: float) -> ConservativeResult:
    """Rotate the closest signed pair toward its common mean; other axes untouched"""
    _check_k(k_sigma)
    best_key, best = None, None
    for pair, pair_signs, closeness in _pair_candidates(meas):
        key = (closeness, sum(1 for s in pair_signs if s > 0))
        if _beats(key, best_key):
            best_key, best = key, (pair, pair_signs)

    pair, pair_signs = best
    logger.debug("One-bit worst case: pair %s signs %s (inner product %.6f)", pair, pair_signs, best_key[0])
    return rotate_pair(meas, pair, pair_signs, k_sigma)


def worst_case_one_bit_exhaustive(meas: MeasurementSet, k_sigma: float, r: float, d: int = 2) -> ConservativeResult:
    """Try every signed pair and keep the rotation that maximizes the bound at r"""
    _check_k(k_sigma)
    best_h, best = -np.inf, None
    for pair, pair_signs, _ in _pair_candidates(meas):
        try:
            candidate = rotate_pair(meas, pair, pair_signs, k_sigma)
        except DegenerateGeometryError:
            continue
        h = steering_bound(candidate.measurement, d, r).h
        if h > best_h + RANK_TOL:
            best_h, best = h, candidate
    if best is None:
        raise DegenerateGeometryError("No rotatable pair in the measurement set")
    return best
