"""
Exchange-rate optimization over the bound envelope.

For a heralding efficiency eta the smallest purity that still demonstrates
steering at rate r is mu(r) = h(r)/eta + r. h is convex piecewise-linear,
so mu is minimized at an envelope breakpoint or an end of [0, 1].
"""
import itertools
import logging
from typing import Iterable, List, NamedTuple, Optional, Tuple

import numpy as np

from ..utils.errors import InvalidArgumentError
from .strategies import TIE_TOL, MeasurementSet, StrategySpace

logger = logging.getLogger(__name__)

UNBIASED_TOL = 1e-6


class GainOptimum(NamedTuple):
    r: float
    h: float
    mu_min: float

    @property
    def violable(self) -> bool:
        """Some state of purity below one would beat the bound"""
        return self.mu_min < 1.0


def validate_efficiency(eta: float):
    if not 0.0 < eta <= 1.0 or not np.isfinite(eta):
        raise InvalidArgumentError(f"Heralding efficiency must lie in (0, 1], got {eta}")


def breakpoints(space: StrategySpace) -> np.ndarray:
    """Candidate exchange rates: both ends plus pairwise line intersections in [0, 1]"""
    n = space.meas.n
    lines = space.lines()
    candidates = {0.0, 1.0}
    for s, t in itertools.combinations(lines, 2):
        if s.m == t.m:
            continue
        r = n * (s.intercept - t.intercept) / (s.m - t.m)
        if 0.0 <= r <= 1.0:
            candidates.add(float(r))
    return np.array(sorted(candidates))


def optimal_gain(meas: MeasurementSet, d: int, eta: float,
                 space: Optional[StrategySpace] = None) -> GainOptimum:
    """Exchange rate minimizing the purity needed for a violation; smallest r on ties"""
    validate_efficiency(eta)
    if space is None:
        space = StrategySpace(meas, d)

    rates = breakpoints(space)
    h = np.array([space.envelope(r) for r in rates])
    mu = h / eta + rates
    best = int(np.flatnonzero(mu <= mu.min() + TIE_TOL)[0])
    return GainOptimum(float(rates[best]), float(h[best]), float(mu[best]))


def min_purity_curve(meas: MeasurementSet, d: int, etas: Iterable[float]) -> List[Tuple[float, float]]:
    space = StrategySpace(meas, d)
    return [(float(eta), optimal_gain(meas, d, eta, space).mu_min) for eta in etas]


def efficiency_grid(eta_min: float = 0.05, eta_max: float = 1.0, points: int = 96) -> np.ndarray:
    if not 0.0 < eta_min <= eta_max <= 1.0 or points < 2:
        raise InvalidArgumentError(f"Bad efficiency grid [{eta_min}, {eta_max}] x {points}")
    return np.linspace(eta_min, eta_max, points)


def is_mutually_unbiased(meas: MeasurementSet, tol: float = UNBIASED_TOL) -> bool:
    gram = meas.axes @ meas.axes.T
    off = gram - np.diag(np.diag(gram))
    return bool(np.all(np.abs(off) <= tol))


def tsirelson(meas: MeasurementSet, d: int) -> float:
    """Steering-inequality violation available to a pure maximally entangled state at r = 0"""
    if not is_mutually_unbiased(meas):
        logger.warning("Measurement axes are not mutually unbiased; the Tsirelson value is only indicative")
    space = StrategySpace(meas, d)
    return 1.0 - space.envelope(0.0)


def werner_residual(eta: float, mu: float, r: float, h: float) -> float:
    """Expected score minus bound for a Werner state of purity mu"""
    return eta * (mu - r) - h
