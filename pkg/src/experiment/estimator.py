"""
Steering score and residual from matched-setting counts.

Counts with a trusted detection are reweighted by 1/beta_b; only the ratio
beta_+ / beta_- matters because the common factor cancels in every estimate.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..utils.errors import InsufficientDataError, InvalidArgumentError
from .simulator import TrialCounts

# rows: untrusted +1, 0, -1; columns: trusted +1, -1
CORRELATOR_WEIGHTS = np.array([[1.0, -1.0], [0.0, 0.0], [-1.0, 1.0]])
DETECTION_WEIGHTS = np.array([[1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])


@dataclass
class ResidualReport:
    r: float
    correlators: np.ndarray
    detection_rates: np.ndarray
    score: float
    standard_error: float
    h: Optional[float] = None

    @property
    def residual(self) -> Optional[float]:
        return None if self.h is None else self.score - self.h

    @property
    def significance(self) -> Optional[float]:
        """Residual in units of its standard error"""
        if self.h is None or self.standard_error == 0:
            return None
        return self.residual / self.standard_error

    @property
    def heralding_efficiency(self) -> float:
        return float(self.detection_rates.mean())

    def rows(self) -> List[dict]:
        rows = [
            {"setting": j + 1, "correlator": float(c), "detection_rate": float(a)}
            for j, (c, a) in enumerate(zip(self.correlators, self.detection_rates))
        ]
        return rows

    def to_dict(self):
        return {
            "r": self.r,
            "h": self.h,
            "score": self.score,
            "residual": self.residual,
            "standard_error": self.standard_error,
            "significance": self.significance,
            "heralding_efficiency": self.heralding_efficiency,
        }


def _normalized(counts: np.ndarray, ratio: float) -> np.ndarray:
    # drop the no-detection column, then divide the '+1' column by the ratio
    return counts[:, :2] / np.array([ratio, 1.0])


def _check_ratios(counts: TrialCounts, bob_ratios: Sequence[float]) -> np.ndarray:
    ratios = np.asarray(bob_ratios, dtype=float).reshape(-1)
    if ratios.shape != (counts.n,):
        raise InvalidArgumentError(f"Expected {counts.n} efficiency ratios, got {ratios.shape[0]}")
    if np.any(ratios <= 0) or not np.all(np.isfinite(ratios)):
        raise InvalidArgumentError("Efficiency ratios must be positive")
    return ratios


def _score(matched: np.ndarray, ratios: np.ndarray, r: float):
    n = ratios.shape[0]
    correlators, detections, variance = np.empty(n), np.empty(n), 0.0
    for j in range(n):
        raw = matched[j][:, :2].astype(float)
        weighted = _normalized(matched[j], ratios[j])
        total = weighted.sum()
        if total <= 0:
            raise InsufficientDataError(f"No trusted-side detections for setting {j + 1}")
        correlators[j] = (CORRELATOR_WEIGHTS * weighted).sum() / total
        detections[j] = (DETECTION_WEIGHTS * weighted).sum() / total

        w = CORRELATOR_WEIGHTS - r * DETECTION_WEIGHTS
        f = correlators[j] - r * detections[j]
        grad = (w - f) / (np.array([ratios[j], 1.0]) * total)
        variance += float((grad ** 2 * raw).sum())
    score = float(np.mean(correlators - r * detections))
    return correlators, detections, score, float(np.sqrt(variance)) / n


def estimate(counts: TrialCounts, bob_ratios: Sequence[float], r: float, h: Optional[float] = None) -> ResidualReport:
    """Score (1/n) sum_j (E^c_j - r E^a_j), and its residual against h when given"""
    if not 0.0 <= r <= 1.0:
        raise InvalidArgumentError(f"Exchange rate r must lie in [0, 1], got {r}")
    ratios = _check_ratios(counts, bob_ratios)
    matched = np.array([counts.matched(j + 1) for j in range(counts.n)])
    correlators, detections, score, se = _score(matched, ratios, r)
    return ResidualReport(float(r), correlators, detections, score, se, h)


def bootstrap_standard_error(counts: TrialCounts, bob_ratios: Sequence[float], r: float,
                             draws: int = 1000, seed: int = 0) -> float:
    """Score spread over Poisson redraws of the matched counts"""
    if draws < 2:
        raise InvalidArgumentError("Need at least two bootstrap draws")
    ratios = _check_ratios(counts, bob_ratios)
    matched = np.array([counts.matched(j + 1) for j in range(counts.n)])
    rng = np.random.default_rng(seed)
    scores = [_score(rng.poisson(matched), ratios, r)[2] for _ in range(draws)]
    return float(np.std(scores, ddof=1))
