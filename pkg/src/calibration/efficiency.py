"""
Detector efficiencies from singles and coincidence rates.

With pair rate N, pair outcome probabilities p_ab and per-outcome detection
efficiencies alpha_a (untrusted side) and beta_b (trusted side):

    C^ab = N alpha_a beta_b p_ab
    A^a  = N alpha_a (p_a+ + p_a-)        B^b = N beta_b (p_+b + p_-b)

These invert in closed form without knowing N or p. Outcome index 0 is '+'
and 1 is '-'; the first coincidence index is always the untrusted outcome.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..geometry.bloch import as_vector, bloch_to_ket
from ..geometry.optics import D_STATE, L_STATE, V_STATE
from ..utils.errors import IllConditionedError, InsufficientDataError, InvalidArgumentError

logger = logging.getLogger(__name__)

CONDITION_FLOOR = 1e-9
PLUS, MINUS = 0, 1


@dataclass
class RateTable:
    """Rates for every (untrusted setting k, trusted setting j) pair"""

    coincidences: np.ndarray  # (K, J, 2, 2)
    alice_singles: np.ndarray  # (K, J, 2)
    bob_singles: np.ndarray  # (K, J, 2)

    def __post_init__(self):
        self.coincidences = np.asarray(self.coincidences, dtype=float)
        self.alice_singles = np.asarray(self.alice_singles, dtype=float)
        self.bob_singles = np.asarray(self.bob_singles, dtype=float)
        k, j = self.coincidences.shape[:2]
        if self.coincidences.shape != (k, j, 2, 2):
            raise InvalidArgumentError(f"Coincidences must be (K, J, 2, 2), got {self.coincidences.shape}")
        if self.alice_singles.shape != (k, j, 2) or self.bob_singles.shape != (k, j, 2):
            raise InvalidArgumentError("Singles must be (K, J, 2) and match the coincidence table")
        for name in ("coincidences", "alice_singles", "bob_singles"):
            values = getattr(self, name)
            if np.any(values < 0) or not np.all(np.isfinite(values)):
                raise InvalidArgumentError(f"{name} must be finite and non-negative")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.coincidences.shape[:2]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.coincidences.ravel(), self.alice_singles.ravel(), self.bob_singles.ravel()])

    def replaced(self, values: np.ndarray) -> "RateTable":
        """Same layout, new flat values (inverse of `flat`)"""
        k, j = self.shape
        c = k * j * 4
        a = c + k * j * 2
        return RateTable(values[:c].reshape(k, j, 2, 2), values[c:a].reshape(k, j, 2), values[a:].reshape(k, j, 2))

    def scaled(self, factor: float) -> "RateTable":
        return self.replaced(self.flat() * factor)

    def _pair(self, k: int, j: int):
        kk, jj = self.shape
        if not (1 <= k <= kk and 1 <= j <= jj):
            raise InvalidArgumentError(f"Setting pair ({k}, {j}) outside table of shape {self.shape}")
        return self.coincidences[k - 1, j - 1], self.alice_singles[k - 1, j - 1], self.bob_singles[k - 1, j - 1]


@dataclass
class EfficiencyEstimate:
    """Matched-setting estimates; arrays are indexed [setting - 1, outcome]"""

    alice: np.ndarray
    bob: np.ndarray
    ratio: np.ndarray
    alice_sigma: Optional[np.ndarray] = None
    bob_sigma: Optional[np.ndarray] = None
    ratio_sigma: Optional[np.ndarray] = None

    def rows(self) -> List[dict]:
        out = []
        for j in range(self.ratio.shape[0]):
            row = {
                "setting": j + 1,
                "alpha_plus": self.alice[j, PLUS],
                "alpha_minus": self.alice[j, MINUS],
                "beta_plus": self.bob[j, PLUS],
                "beta_minus": self.bob[j, MINUS],
                "ratio": self.ratio[j],
            }
            if self.ratio_sigma is not None:
                row.update({
                    "alpha_plus_sigma": self.alice_sigma[j, PLUS],
                    "alpha_minus_sigma": self.alice_sigma[j, MINUS],
                    "beta_plus_sigma": self.bob_sigma[j, PLUS],
                    "beta_minus_sigma": self.bob_sigma[j, MINUS],
                    "ratio_sigma": self.ratio_sigma[j],
                })
            out.append(row)
        return out


def forward_rates(alice_eff, bob_eff, joint_probs, pair_rate: float) -> RateTable:
    """Compose rates from efficiencies (K,2)/(J,2) and outcome probabilities (K,J,2,2)"""
    alpha = np.asarray(alice_eff, dtype=float)
    beta = np.asarray(bob_eff, dtype=float)
    p = np.asarray(joint_probs, dtype=float)
    if p.shape != (alpha.shape[0], beta.shape[0], 2, 2):
        raise InvalidArgumentError(f"Joint probabilities must be (K, J, 2, 2), got {p.shape}")
    coincidences = pair_rate * alpha[:, None, :, None] * beta[None, :, None, :] * p
    alice = pair_rate * alpha[:, None, :] * p.sum(axis=3)
    bob = pair_rate * beta[None, :, :] * p.sum(axis=2)
    return RateTable(coincidences, alice, bob)


def _safe_ratio(numerator: float, first: float, second: float) -> float:
    denominator = first - second
    scale = max(abs(first), abs(second))
    if scale == 0.0 or abs(denominator) < CONDITION_FLOOR * scale:
        condition = np.inf if denominator == 0 else scale / abs(denominator)
        raise IllConditionedError(
            f"Efficiency denominator {denominator:.3e} is below {CONDITION_FLOOR:g} of its terms", condition
        )
    return numerator / denominator


def bob_efficiencies(rates: RateTable, k: int, j: int) -> Tuple[float, float]:
    C, A, _ = rates._pair(k, j)
    out = []
    for b in (PLUS, MINUS):
        bb = 1 - b
        numerator = C[b, bb] * C[bb, b] - C[b, b] * C[bb, bb]
        out.append(_safe_ratio(numerator, C[b, bb] * A[bb], C[bb, bb] * A[b]))
    return out[0], out[1]


def alice_efficiencies(rates: RateTable, k: int, j: int) -> Tuple[float, float]:
    C, _, B = rates._pair(k, j)
    out = []
    for a in (PLUS, MINUS):
        aa = 1 - a
        numerator = C[a, aa] * C[aa, a] - C[a, a] * C[aa, aa]
        out.append(_safe_ratio(numerator, C[aa, a] * B[aa], C[aa, aa] * B[a]))
    return out[0], out[1]


def bob_ratio(rates: RateTable, j: int) -> float:
    """beta_+ / beta_- for matched settings; needs only coincidences and untrusted singles"""
    C, A, _ = rates._pair(j, j)
    numerator = C[MINUS, PLUS] * A[PLUS] - C[PLUS, PLUS] * A[MINUS]
    return _safe_ratio(numerator, C[PLUS, MINUS] * A[MINUS], C[MINUS, MINUS] * A[PLUS])


def _propagated_sigma(fn: Callable[[RateTable], float], rates: RateTable, duration: float) -> float:
    """First-order Poisson error: rates are counts / duration"""
    x = rates.flat()
    variance = x / duration
    total = 0.0
    for i in np.flatnonzero(variance > 0):
        step = 1e-6 * max(abs(x[i]), 1e-12)
        up, down = x.copy(), x.copy()
        up[i] += step
        down[i] -= step
        grad = (fn(rates.replaced(up)) - fn(rates.replaced(down))) / (2 * step)
        total += grad * grad * variance[i]
    return float(np.sqrt(total))


def _check_duration(duration: float):
    if not duration > 0:
        raise InvalidArgumentError(f"Counting duration must be positive, got {duration}")


def estimate_efficiencies(rates: RateTable, duration: Optional[float] = None) -> EfficiencyEstimate:
    k, j = rates.shape
    settings = min(k, j)
    alice = np.array([alice_efficiencies(rates, s, s) for s in range(1, settings + 1)])
    bob = np.array([bob_efficiencies(rates, s, s) for s in range(1, settings + 1)])
    ratio = np.array([bob_ratio(rates, s) for s in range(1, settings + 1)])
    estimate = EfficiencyEstimate(alice, bob, ratio)
    if duration is None:
        return estimate

    _check_duration(duration)
    estimate.alice_sigma = np.array([
        [_propagated_sigma(lambda t, s=s, o=o: alice_efficiencies(t, s, s)[o], rates, duration) for o in (PLUS, MINUS)]
        for s in range(1, settings + 1)
    ])
    estimate.bob_sigma = np.array([
        [_propagated_sigma(lambda t, s=s, o=o: bob_efficiencies(t, s, s)[o], rates, duration) for o in (PLUS, MINUS)]
        for s in range(1, settings + 1)
    ])
    estimate.ratio_sigma = np.array([
        _propagated_sigma(lambda t, s=s: bob_ratio(t, s), rates, duration) for s in range(1, settings + 1)
    ])
    return estimate


def ratio_sigma(rates: RateTable, j: int, duration: float) -> float:
    _check_duration(duration)
    return _propagated_sigma(lambda t: bob_ratio(t, j), rates, duration)


def ratio_uncertainty_resampled(rates: RateTable, j: int, duration: float, draws: int = 2000,
                                seed: int = 0) -> float:
    """Cross-check of the propagated error by redrawing every count from Poisson"""
    _check_duration(duration)
    rng = np.random.default_rng(seed)
    counts = rates.flat() * duration
    values = [bob_ratio(rates.replaced(rng.poisson(counts) / duration), j) for _ in range(draws)]
    return float(np.std(values, ddof=1))


def average_rates(series: Sequence[RateTable]) -> RateTable:
    if not series:
        raise InsufficientDataError("Empty rate series")
    return series[0].replaced(np.mean([t.flat() for t in series], axis=0))


def windowed_ratios(series: Sequence[RateTable], j: int, window: int,
                    duration: float) -> Tuple[np.ndarray, np.ndarray]:
    """Ratio and its Poisson error over consecutive non-overlapping windows"""
    if window < 1:
        raise InvalidArgumentError(f"Window must be >= 1 entry, got {window}")
    blocks = len(series) // window
    if blocks < 1:
        raise InsufficientDataError(f"{len(series)} entries cannot fill a window of {window}")
    values, errors = [], []
    for b in range(blocks):
        table = average_rates(series[b * window:(b + 1) * window])
        values.append(bob_ratio(table, j))
        errors.append(ratio_sigma(table, j, duration * window))
    return np.array(values), np.array(errors)


def allan_deviation(series: Sequence[float], window: int) -> float:
    """Non-overlapping Allan deviation of a scalar series at the given window length"""
    x = np.asarray(series, dtype=float)
    if window < 1:
        raise InvalidArgumentError(f"Window must be >= 1, got {window}")
    blocks = x.shape[0] // window
    if blocks < 2:
        raise InsufficientDataError(f"Need at least two windows of {window}; series has {x.shape[0]} entries")
    means = x[:blocks * window].reshape(blocks, window).mean(axis=1)
    return float(np.sqrt(0.5 * np.mean(np.diff(means) ** 2)))


def allan_curve(series: Sequence[float], windows: Optional[Sequence[int]] = None) -> List[Tuple[int, float]]:
    x = np.asarray(series, dtype=float)
    if windows is None:
        windows = range(1, x.shape[0] // 2 + 1)
    return [(int(w), allan_deviation(x, w)) for w in windows]


def optimal_window(series: Sequence[float], windows: Optional[Sequence[int]] = None) -> int:
    """Window with the smallest Allan deviation (shortest on ties)"""
    curve = allan_curve(series, windows)
    return min(curve, key=lambda item: (item[1], item[0]))[0]


def conservative_ratio(values: Sequence[float], errors: Sequence[float], pdl: float = 0.02,
                       k: float = 5.0) -> float:
    """Lowest per-window ratio after the polarization-dependent-loss allowance and k standard errors"""
    values = np.asarray(values, dtype=float)
    errors = np.broadcast_to(np.asarray(errors, dtype=float), values.shape)
    if values.size == 0:
        raise InsufficientDataError("No windows to summarize")
    if not 0.0 <= pdl < 1.0 or k < 0:
        raise InvalidArgumentError(f"Need 0 <= pdl < 1 and k >= 0, got pdl={pdl}, k={k}")
    return float(np.min(values * (1.0 - pdl) - k * errors))


# Systematic-error model for calibration runs

BASES = (V_STATE, D_STATE, L_STATE)


@dataclass
class CalibrationModel:
    """
    Per-pulse model of a calibration run: independent pairs (two pairs with
    probability pair_probability**2), per-detector background clicks, and
    polarization-dependent coupling loss on the trusted party's H photons.
    """

    alice_efficiency: Tuple[float, float] = (0.8, 0.8)
    bob_efficiency: Tuple[float, float] = (0.80, 0.69)
    pair_probability: float = 0.0072
    background_rate: float = 200.0
    trials: float = 1e6
    pdl_fraction: float = 0.0
    basis: np.ndarray = field(default_factory=lambda: V_STATE.copy())

    def __post_init__(self):
        p = self.pair_probability
        if not 0.0 <= p or p + p * p > 1.0:
            raise InvalidArgumentError(f"Pair probability {p} out of range")
        if self.trials <= 0:
            raise InvalidArgumentError("Trials per second must be positive")
        if self.background_rate < 0 or self.background_rate > self.trials:
            raise InvalidArgumentError("Background rate must lie in [0, trials]")
        if not 0.0 <= self.pdl_fraction < 1.0:
            raise InvalidArgumentError(f"PDL fraction must lie in [0, 1), got {self.pdl_fraction}")
        self.basis = as_vector(self.basis)

    @property
    def true_ratio(self) -> float:
        return self.bob_efficiency[PLUS] / self.bob_efficiency[MINUS]

    @property
    def background_probability(self) -> float:
        return self.background_rate / self.trials

    def pair_numbers(self) -> np.ndarray:
        p = self.pair_probability
        return np.array([1.0 - p - p * p, p, p * p])


def pair_outcomes(model: CalibrationModel) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-pair outcome probabilities for a singlet measured along `basis` on
    both sides: joint (both photons arrive), untrusted marginal, trusted marginal.
    """
    singlet = np.array([[0.0, -1.0], [1.0, 0.0]]) / np.sqrt(2.0)  # rows: untrusted V/H, cols: trusted V/H
    coupled = singlet @ np.diag([1.0, np.sqrt(1.0 - model.pdl_fraction)])
    kets = [bloch_to_ket(model.basis), bloch_to_ket(-model.basis)]

    def probs(state):
        return np.array([[abs(ka.conj() @ state @ kb.conj()) ** 2 for kb in kets] for ka in kets])

    joint = probs(coupled)
    return joint, probs(singlet).sum(axis=1), joint.sum(axis=0)


def calibration_rates(model: CalibrationModel) -> RateTable:
    """Exact expected rates (per second) under the calibration model"""
    joint, alice_marginal, bob_marginal = pair_outcomes(model)
    alpha = np.asarray(model.alice_efficiency, dtype=float)
    beta = np.asarray(model.bob_efficiency, dtype=float)
    u = alpha * alice_marginal
    v = beta * bob_marginal
    w = alpha[:, None] * beta[None, :] * joint
    q = model.background_probability
    weights = model.pair_numbers()

    def expect(base):
        # average of base**K over the number of pairs K
        return weights[0] + weights[1] * base + weights[2] * base ** 2

    none_a = (1 - q) * expect(1 - u)
    none_b = (1 - q) * expect(1 - v)
    none_ab = (1 - q) ** 2 * expect(1 - u[:, None] - v[None, :] + w)

    coincidences = 1 - none_a[:, None] - none_b[None, :] + none_ab
    return RateTable(
        (model.trials * coincidences)[None, None],
        (model.trials * (1 - none_a))[None, None],
        (model.trials * (1 - none_b))[None, None],
    )


def sample_calibration_counts(model: CalibrationModel, pulses: int, seed: int = 0,
                              block: int = 1_000_000) -> RateTable:
    """
    Monte-Carlo counts for `pulses` pulses, drawn block by block from
    independent child streams of the seed. Divide by pulses / trials for rates.
    """
    if pulses < 1:
        raise InvalidArgumentError("Need at least one pulse")
    joint, alice_marginal, _ = pair_outcomes(model)
    # per pair: (untrusted outcome, trusted outcome or lost)
    lost = alice_marginal - joint.sum(axis=1)
    categories = np.concatenate([joint.ravel(), np.maximum(lost, 0.0)])
    categories = categories / categories.sum()
    alpha = np.asarray(model.alice_efficiency, dtype=float)
    beta = np.asarray(model.bob_efficiency, dtype=float)
    q = model.background_probability
    weights = model.pair_numbers()

    coincidences = np.zeros((2, 2))
    alice = np.zeros(2)
    bob = np.zeros(2)
    sizes = [block] * (pulses // block) + ([pulses % block] if pulses % block else [])
    for size, child in zip(sizes, np.random.SeedSequence(seed).spawn(len(sizes))):
        rng = np.random.default_rng(child)
        n_pairs = rng.choice(3, size=size, p=weights)
        clicks = rng.random((size, 4)) < q  # A+, A-, B+, B-
        for slot in (1, 2):
            present = n_pairs >= slot
            outcome = rng.choice(6, size=size, p=categories)
            a_out = np.where(outcome < 4, outcome // 2, outcome - 4)
            b_out = np.where(outcome < 4, outcome % 2, -1)
            a_hit = present & (rng.random(size) < alpha[a_out])
            b_hit = present & (b_out >= 0) & (rng.random(size) < beta[np.maximum(b_out, 0)])
            for o in (PLUS, MINUS):
                clicks[:, o] |= a_hit & (a_out == o)
                clicks[:, 2 + o] |= b_hit & (b_out == o)
        alice += clicks[:, :2].sum(axis=0)
        bob += clicks[:, 2:].sum(axis=0)
        coincidences += (clicks[:, :2, None] & clicks[:, None, 2:]).sum(axis=0)
    return RateTable(coincidences[None, None], alice[None, None], bob[None, None])


@dataclass
class BiasReport:
    true_ratio: float
    estimated: np.ndarray  # per basis
    bias: np.ndarray
    relative_error: np.ndarray

    def rows(self) -> List[dict]:
        return [
            {"basis": j + 1, "true_ratio": self.true_ratio, "estimated_ratio": float(e),
             "bias": float(b), "relative_error": float(r)}
            for j, (e, b, r) in enumerate(zip(self.estimated, self.bias, self.relative_error))
        ]

    @property
    def worst_relative_error(self) -> float:
        return float(np.max(np.abs(self.relative_error)))


def bias_study(background_rate: float = 200.0, pair_prob: float = 0.0072, trials: float = 1e6,
               pdl_fraction: float = 0.0, alice_efficiency: Tuple[float, float] = (0.8, 0.8),
               bob_efficiency: Tuple[float, float] = (0.80, 0.69)) -> BiasReport:
    """Signed error of the ratio estimator in each measured basis under the calibration model"""
    estimated = []
    truth = None
    for basis in BASES:
        model = CalibrationModel(alice_efficiency, bob_efficiency, pair_prob, background_rate, trials,
                                 pdl_fraction, basis)
        truth = model.true_ratio
        estimated.append(bob_ratio(calibration_rates(model), 1))
    estimated = np.array(estimated)
    bias = estimated - truth
    logger.info("Ratio bias per basis: %s", np.array2string(bias, precision=6))
    return BiasReport(truth, estimated, bias, bias / truth)
