"""
Deterministic cheating strategies and the steering bound h(r).

A strategy assigns each setting j an answer alpha_j in {+1, 0, -1} (0 means
"announce no detection") and a message label ell_j in 1..d. For fixed
(alpha, ell) the best state to send with message l is the normalized sum of
alpha_j b_j over the settings carrying label l, so the strategy's value is

    (1/n) [ -r m + sum_l | sum_{ell_j = l} alpha_j b_j | ]

with m the number of non-null answers. h(r) is the best value over all
strategies, i.e. the upper envelope of the affine lines c_s - r m_s / n.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..geometry.bloch import UNIT_TOL, max_eigen_sum
from ..utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

TIE_TOL = 1e-12
SYMMETRY_TOL = 1e-6


@dataclass
class MeasurementSet:
    """Trusted party's n measurement axes with per-axis angular uncertainty"""

    axes: np.ndarray
    sigmas: Optional[np.ndarray] = None

    def __post_init__(self):
        self.axes = np.atleast_2d(np.asarray(self.axes, dtype=float))
        if self.axes.ndim != 2 or self.axes.shape[1] != 3:
            raise InvalidArgumentError(f"Axes must have shape (n, 3), got {self.axes.shape}")
        if self.n < 2:
            raise InvalidArgumentError(f"Need at least two settings, got {self.n}")
        if not np.all(np.isfinite(self.axes)):
            raise InvalidArgumentError("Axes contain non-finite values")
        norms = np.linalg.norm(self.axes, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise InvalidArgumentError(f"Axes must be unit vectors, norms are {np.round(norms, 12).tolist()}")

        if self.sigmas is None:
            self.sigmas = np.zeros(self.n)
        self.sigmas = np.asarray(self.sigmas, dtype=float).reshape(-1)
        if self.sigmas.shape != (self.n,):
            raise InvalidArgumentError(f"Expected {self.n} sigmas, got {self.sigmas.shape[0]}")
        if np.any(self.sigmas < 0) or not np.all(np.isfinite(self.sigmas)):
            raise InvalidArgumentError("Sigmas must be finite and non-negative")

    @property
    def n(self) -> int:
        return self.axes.shape[0]

    @classmethod
    def from_estimates(cls, axes, sigmas=None) -> "MeasurementSet":
        """Build from rounded estimates, renormalizing each axis"""
        axes = np.atleast_2d(np.asarray(axes, dtype=float))
        norms = np.linalg.norm(axes, axis=1, keepdims=True)
        if np.any(norms < 1e-12):
            raise InvalidArgumentError("Zero-length axis estimate")
        return cls(axes / norms, sigmas)

    @classmethod
    def octahedral(cls) -> "MeasurementSet":
        return cls(np.eye(3)[[2, 0, 1]])

    def is_symmetric(self, tol: float = SYMMETRY_TOL) -> bool:
        """Every pair of axes meets at the same |cosine|, so no setting is special"""
        overlaps = np.abs(self.axes @ self.axes.T)[np.triu_indices(self.n, k=1)]
        return bool(np.ptp(overlaps) <= tol)

    def permuted(self, order: Sequence[int]) -> "MeasurementSet":
        order = list(order)
        return MeasurementSet(self.axes[order], self.sigmas[order])

    def to_dict(self):
        return {"axes": self.axes.tolist(), "sigmas": self.sigmas.tolist()}


@dataclass(frozen=True)
class CheatStrategy:
    alpha: Tuple[int, ...]
    ell: Tuple[int, ...]
    d: int

    def __post_init__(self):
        if len(self.alpha) != len(self.ell):
            raise InvalidArgumentError("alpha and ell differ in length")
        if any(a not in (-1, 0, 1) for a in self.alpha):
            raise InvalidArgumentError(f"alpha entries must be -1, 0 or +1: {self.alpha}")
        if any(not 1 <= l <= self.d for l in self.ell):
            raise InvalidArgumentError(f"message labels must lie in 1..{self.d}: {self.ell}")

    @property
    def m(self) -> int:
        """Number of settings answered with a detection"""
        return sum(1 for a in self.alpha if a != 0)

    @property
    def message_bits(self) -> int:
        return self.d.bit_length() - 1

    def groups(self) -> List[List[int]]:
        return [[j for j, l in enumerate(self.ell) if l == label] for label in range(1, self.d + 1)]

    def to_dict(self):
        return {"alpha": list(self.alpha), "ell": list(self.ell), "d": self.d}


@dataclass(frozen=True)
class FenellaEnsemble:
    """Optimal state per message label; None where the label's group sum vanishes"""

    states: Tuple[Optional[np.ndarray], ...]

    def to_dict(self):
        return {"states": [None if s is None else s.tolist() for s in self.states]}


@dataclass(frozen=True)
class BoundResult:
    r: float
    h: float
    strategy: CheatStrategy
    ensemble: FenellaEnsemble = field(compare=False)

    def to_dict(self):
        return {"r": self.r, "h": self.h, **self.strategy.to_dict(), **self.ensemble.to_dict()}


@dataclass(frozen=True)
class StrategyLine:
    """Best strategy with exactly m non-null answers"""

    m: int
    intercept: float
    strategy: CheatStrategy


def validate_alphabet(d: int, n: int):
    if not isinstance(d, (int, np.integer)) or d < 1 or d > n - 1:
        raise InvalidArgumentError(f"Message alphabet size must satisfy 1 <= d <= n-1 = {n - 1}, got {d}")
    if d & (d - 1):
        raise InvalidArgumentError(f"Message alphabet size must be a power of two, got {d}")


def validate_rate(r: float):
    if not 0.0 <= r <= 1.0 or not np.isfinite(r):
        raise InvalidArgumentError(f"Exchange rate r must lie in [0, 1], got {r}")


def strategy_value(strategy: CheatStrategy, meas: MeasurementSet, r: float) -> Tuple[float, FenellaEnsemble]:
    """Value of one strategy at exchange rate r, with its optimal ensemble"""
    validate_rate(r)
    if len(strategy.alpha) != meas.n:
        raise InvalidArgumentError(f"Strategy covers {len(strategy.alpha)} settings, set has {meas.n}")

    total = 0.0
    states = []
    for members in strategy.groups():
        value, state = max_eigen_sum(meas.axes[members], [strategy.alpha[j] for j in members])
        total += value
        states.append(state)
    return (total - r * strategy.m) / meas.n, FenellaEnsemble(tuple(states))


def _alpha_vectors(n: int, prune: bool) -> np.ndarray:
    # Global sign flip leaves every group norm unchanged; keep the
    # lexicographically smaller member (first non-zero entry is -1).
    rows = []
    for alpha in itertools.product((-1, 0, 1), repeat=n):
        if prune:
            lead = next((a for a in alpha if a != 0), -1)
            if lead != -1:
                continue
        rows.append(alpha)
    return np.array(rows, dtype=np.int8)


def _label_vectors(n: int, d: int, prune: bool) -> np.ndarray:
    # Relabelling the messages is a symmetry; restricted-growth strings are
    # the lexicographically smallest representative of each partition.
    rows = []
    for ell in itertools.product(range(1, d + 1), repeat=n):
        if prune:
            top = 0
            canonical = True
            for label in ell:
                if label > top + 1:
                    canonical = False
                    break
                top = max(top, label)
            if not canonical:
                continue
        rows.append(ell)
    return np.array(rows, dtype=np.int8)


class StrategySpace:
    """
    All strategies for a measurement set and alphabet, enumerated once.

    Strategies are indexed in lexicographic (alpha, then ell) order so that
    taking the first maximizer implements the tie-break rule.
    """

    def __init__(self, meas: MeasurementSet, d: int, prune: bool = True, chunk: int = 512):
        validate_alphabet(d, meas.n)
        if not meas.is_symmetric():
            logger.warning("Measurement axes are not rotation-symmetric; the bound still holds")
        self.meas = meas
        self.d = d
        self.prune = prune
        self.alphas = _alpha_vectors(meas.n, prune)
        self.ells = _label_vectors(meas.n, d, prune)

        n_alpha, n_ell = len(self.alphas), len(self.ells)
        norms = np.empty((n_alpha, n_ell))
        signed = self.alphas.astype(float)
        for start in range(0, n_ell, chunk):
            block = self.ells[start:start + chunk]
            onehot = (block[:, :, None] == np.arange(1, d + 1)[None, None, :]).astype(float)
            sums = np.einsum("aj,ljg,jx->algx", signed, onehot, meas.axes)
            norms[:, start:start + chunk] = np.linalg.norm(sums, axis=-1).sum(axis=-1)

        self.intercepts = norms.reshape(-1) / meas.n
        self.weights = np.repeat(np.count_nonzero(self.alphas, axis=1), n_ell)
        logger.debug("Enumerated %d strategies (n=%d, d=%d, prune=%s)", self.size, meas.n, d, prune)

    @property
    def size(self) -> int:
        return self.intercepts.shape[0]

    def strategy(self, index: int) -> CheatStrategy:
        a, l = divmod(int(index), len(self.ells))
        return CheatStrategy(tuple(int(x) for x in self.alphas[a]), tuple(int(x) for x in self.ells[l]), self.d)

    def values(self, r: float) -> np.ndarray:
        return self.intercepts - r * self.weights / self.meas.n

    def best_index(self, r: float) -> int:
        values = self.values(r)
        return int(np.flatnonzero(values >= values.max() - TIE_TOL)[0])

    def lines(self) -> List[StrategyLine]:
        """Per-m best intercepts; h(r) is the upper envelope of these lines"""
        result = []
        for m in range(self.meas.n + 1):
            idx = np.flatnonzero(self.weights == m)
            if idx.size == 0:
                continue
            c = self.intercepts[idx]
            pick = idx[np.flatnonzero(c >= c.max() - TIE_TOL)[0]]
            result.append(StrategyLine(m, float(self.intercepts[pick]), self.strategy(pick)))
        return result

    def envelope(self, r: float) -> float:
        return float(self.values(r).max())

    def __iter__(self) -> Iterator[CheatStrategy]:
        for index in range(self.size):
            yield self.strategy(index)


def bound_lines(meas: MeasurementSet, d: int) -> List[StrategyLine]:
    return StrategySpace(meas, d).lines()


def steering_bound(meas: MeasurementSet, d: int, r: float, prune: bool = True,
                   space: Optional[StrategySpace] = None) -> BoundResult:
    """Best cheating score h(r) with the (lexicographically first) strategy attaining it"""
    validate_rate(r)
    if space is None:
        space = StrategySpace(meas, d, prune)
    strategy = space.strategy(space.best_index(r))
    value, ensemble = strategy_value(strategy, meas, r)
    return BoundResult(r=float(r), h=value, strategy=strategy, ensemble=ensemble)
