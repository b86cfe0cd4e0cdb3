"""
Trial-level model of the steering test.

The pair is a Werner state of purity mu. The untrusted side reports +1/-1 or
0 (no detection, or both detectors fired); the trusted side reports +1/-1 or
nothing, and a double click there is resolved by a fair coin. Untrusted
outcome labels are flipped so matched settings are positively correlated.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from ..bounds.strategies import MeasurementSet
from ..utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

ALICE_OUTCOMES = (1, 0, -1)
BOB_OUTCOMES = (1, -1, 0)  # 0 marks "no detection" on the trusted side


def _outcome_index(outcomes, value) -> int:
    try:
        return outcomes.index(int(value))
    except ValueError:
        raise InvalidArgumentError(f"Outcome {value} not in {outcomes}") from None


def _efficiency_table(value, n: int, name: str) -> np.ndarray:
    table = np.broadcast_to(np.asarray(value, dtype=float), (n, 2)).copy()
    if np.any(table < 0) or np.any(table > 1):
        raise InvalidArgumentError(f"{name} efficiencies must lie in [0, 1]")
    return table


@dataclass
class ExperimentConfig:
    """Efficiency arrays are indexed [setting - 1, outcome] with outcome 0 = '+1', 1 = '-1'"""

    mu: float
    alice_axes: np.ndarray
    bob_axes: np.ndarray
    alice_efficiency: np.ndarray
    bob_efficiency: np.ndarray
    trials: int
    dark_count: float = 0.0
    seed: int = 0
    random_settings: bool = False

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise InvalidArgumentError(f"Purity mu must lie in [0, 1], got {self.mu}")
        self.alice_axes = np.atleast_2d(np.asarray(self.alice_axes, dtype=float))
        self.bob_axes = np.atleast_2d(np.asarray(self.bob_axes, dtype=float))
        if self.alice_axes.shape != self.bob_axes.shape or self.bob_axes.shape[1] != 3:
            raise InvalidArgumentError("Both parties need the same number of 3-component axes")
        n = self.n
        self.alice_efficiency = _efficiency_table(self.alice_efficiency, n, "Untrusted")
        self.bob_efficiency = _efficiency_table(self.bob_efficiency, n, "Trusted")
        if self.trials < 0:
            raise InvalidArgumentError(f"Trials per setting pair must be non-negative, got {self.trials}")
        if not 0.0 <= self.dark_count < 1.0:
            raise InvalidArgumentError(f"Dark-count probability must lie in [0, 1), got {self.dark_count}")
        if self.seed < 0:
            raise InvalidArgumentError("Seed must be non-negative")

    @property
    def n(self) -> int:
        return self.bob_axes.shape[0]

    @classmethod
    def aligned(cls, mu: float, meas: MeasurementSet, alice_efficiency=1.0, bob_efficiency=(1.0, 1.0),
                trials: int = 1_000_000, dark_count: float = 0.0, seed: int = 0,
                random_settings: bool = False) -> "ExperimentConfig":
        """Both parties measure along the given set"""
        return cls(mu, meas.axes.copy(), meas.axes.copy(), alice_efficiency, bob_efficiency,
                   trials, dark_count, seed, random_settings)

    def to_dict(self):
        return {
            "mu": self.mu,
            "alice_axes": self.alice_axes.tolist(),
            "bob_axes": self.bob_axes.tolist(),
            "alice_efficiency": self.alice_efficiency.tolist(),
            "bob_efficiency": self.bob_efficiency.tolist(),
            "trials": self.trials,
            "dark_count": self.dark_count,
            "seed": self.seed,
            "random_settings": self.random_settings,
        }


@dataclass
class TrialCounts:
    """counts[k-1, j-1, a_index, b_index] over ALICE_OUTCOMES x BOB_OUTCOMES"""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = self.counts.shape[0]
        if self.counts.shape != (n, n, 3, 3):
            raise InvalidArgumentError(f"Counts must have shape (n, n, 3, 3), got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise InvalidArgumentError("Counts must be non-negative")

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    def get(self, a: int, b: int, k: int, j: int) -> int:
        return int(self.counts[k - 1, j - 1, _outcome_index(ALICE_OUTCOMES, a), _outcome_index(BOB_OUTCOMES, b)])

    def matched(self, j: int) -> np.ndarray:
        return self.counts[j - 1, j - 1]

    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=(2, 3))

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"k": k + 1, "j": j + 1, "a": a, "b": b, "N": int(self.counts[k, j, ai, bi])}
            for k in range(self.n) for j in range(self.n)
            for ai, a in enumerate(ALICE_OUTCOMES) for bi, b in enumerate(BOB_OUTCOMES)
        ]
        return pd.DataFrame(rows, columns=["k", "j", "a", "b", "N"])

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "TrialCounts":
        missing = {"k", "j", "a", "b", "N"} - set(frame.columns)
        if missing:
            raise InvalidArgumentError(f"Counts table lacks columns {sorted(missing)}")
        n = int(max(frame["k"].max(), frame["j"].max()))
        counts = np.zeros((n, n, 3, 3), dtype=np.int64)
        for row in frame.itertuples(index=False):
            counts[int(row.k) - 1, int(row.j) - 1,
                   _outcome_index(ALICE_OUTCOMES, row.a), _outcome_index(BOB_OUTCOMES, row.b)] += int(row.N)
        return cls(counts)


def _click_outcomes(efficiency: float, q: float, coin_on_double: bool) -> np.ndarray:
    """[P(true outcome), P(opposite outcome), P(no result)] for one detector pair"""
    hit = 1.0 - (1.0 - efficiency) * (1.0 - q)
    true_only = hit * (1.0 - q)
    other_only = (1.0 - hit) * q
    both = hit * q
    if coin_on_double:
        return np.array([true_only + both / 2, other_only + both / 2, (1.0 - hit) * (1.0 - q)])
    return np.array([true_only, other_only, (1.0 - hit) * (1.0 - q) + both])


def joint_outcome_distribution(config: ExperimentConfig, k: int, j: int) -> np.ndarray:
    """P(a, b | k, j) as a 3x3 array over ALICE_OUTCOMES x BOB_OUTCOMES"""
    if not (1 <= k <= config.n and 1 <= j <= config.n):
        raise InvalidArgumentError(f"Setting pair ({k}, {j}) outside 1..{config.n}")
    overlap = float(config.alice_axes[k - 1] @ config.bob_axes[j - 1])
    q = config.dark_count
    dist = np.zeros((3, 3))
    for a0 in (1, -1):
        for b0 in (1, -1):
            ideal = 0.25 * (1.0 + a0 * b0 * config.mu * overlap)
            ai = 0 if a0 == 1 else 1
            bi = 0 if b0 == 1 else 1
            pa = _click_outcomes(config.alice_efficiency[k - 1, ai], q, coin_on_double=False)
            pb = _click_outcomes(config.bob_efficiency[j - 1, bi], q, coin_on_double=True)
            a_rows = [_outcome_index(ALICE_OUTCOMES, a0), _outcome_index(ALICE_OUTCOMES, -a0), 1]
            b_cols = [_outcome_index(BOB_OUTCOMES, b0), _outcome_index(BOB_OUTCOMES, -b0), 2]
            for pa_value, row in zip(pa, a_rows):
                for pb_value, col in zip(pb, b_cols):
                    dist[row, col] += ideal * pa_value * pb_value
    return dist


def simulate(config: ExperimentConfig) -> TrialCounts:
    """
    Multinomial draw of every setting pair's outcome table.

    Each pair (and the setting-choice draw) has its own child stream of the
    seed, so results depend only on the configuration.
    """
    n = config.n
    streams = np.random.SeedSequence(config.seed).spawn(n * n + 1)
    if config.random_settings:
        chooser = np.random.default_rng(streams[-1])
        per_pair = chooser.multinomial(config.trials * n * n, np.full(n * n, 1.0 / (n * n))).reshape(n, n)
    else:
        per_pair = np.full((n, n), config.trials, dtype=np.int64)

    counts = np.zeros((n, n, 3, 3), dtype=np.int64)
    for k in range(n):
        for j in range(n):
            dist = joint_outcome_distribution(config, k + 1, j + 1).ravel()
            rng = np.random.default_rng(streams[k * n + j])
            counts[k, j] = rng.multinomial(per_pair[k, j], dist / dist.sum()).reshape(3, 3)
    logger.info("Simulated %d trials (mu=%.4f, seed=%d)", int(per_pair.sum()), config.mu, config.seed)
    return TrialCounts(counts)
