"""
Measurement tomography of the trusted party's detector.

A probe sends a known input state s and records coincidences for each
setting. The expected count for axis b is  scale * trials * (1 + b.s) / 2;
axes are fitted by Poisson maximum likelihood with the scale profiled out,
and their uncertainty comes from a parametric bootstrap that also perturbs
the preparation waveplates.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from ..bounds.strategies import MeasurementSet
from ..geometry.bloch import normalize
from ..geometry.optics import PREPARATION_ANGLES, PreparationErrors, WaveplateError, preparation_state
from ..utils.errors import InsufficientDataError, InvalidArgumentError, IllPosedFitError

logger = logging.getLogger(__name__)

P_FLOOR = 1e-15
MAX_FAILURE_FRACTION = 0.01
MIN_BOOTSTRAP_TRIALS = 100

RETARDANCE_TOLERANCE_WAVES = 0.005
ZERO_ANGLE_SD_DEG = 0.1

# (theta, phi) of +z, -z, +x, -x, +y, -y
CANONICAL_STARTS = (
    (0.0, 0.0),
    (np.pi, 0.0),
    (np.pi / 2, 0.0),
    (np.pi / 2, np.pi),
    (np.pi / 2, np.pi / 2),
    (np.pi / 2, -np.pi / 2),
)


@dataclass
class ProbeRecord:
    """One probe run: prepared state plus per-setting coincidences and trials"""

    label: str
    counts: np.ndarray
    trials: np.ndarray
    input_state: Optional[np.ndarray] = None

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float).reshape(-1)
        self.trials = np.asarray(self.trials, dtype=float).reshape(-1)
        if self.counts.shape != self.trials.shape:
            raise InvalidArgumentError(f"Probe {self.label}: counts and trials differ in length")
        if np.any(self.counts < 0) or np.any(self.trials <= 0):
            raise InvalidArgumentError(f"Probe {self.label}: counts must be >= 0 and trials > 0")
        if self.input_state is None:
            self.input_state = preparation_state(self.label)
        self.input_state = np.asarray(self.input_state, dtype=float)

    @property
    def settings(self) -> int:
        return self.counts.shape[0]


class AxisFit(NamedTuple):
    axis: np.ndarray
    scale: float
    log_likelihood: float


@dataclass
class BootstrapAxis:
    setting: int
    point_estimate: np.ndarray
    mean_axis: np.ndarray
    sigma: float
    failures: int = 0

    def to_dict(self):
        return {
            "setting": self.setting,
            "x": float(self.mean_axis[0]),
            "y": float(self.mean_axis[1]),
            "z": float(self.mean_axis[2]),
            "sigma": self.sigma,
            "failures": self.failures,
        }


@dataclass
class TomographyEstimate:
    axes: List[BootstrapAxis] = field(default_factory=list)
    trials: int = 0

    def to_measurement_set(self) -> MeasurementSet:
        return MeasurementSet.from_estimates([a.mean_axis for a in self.axes], [a.sigma for a in self.axes])


def _axis(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def expected_counts(axis, scale: float, states: np.ndarray, trials: np.ndarray) -> np.ndarray:
    states = np.atleast_2d(states)
    return scale * np.asarray(trials, dtype=float) * (1.0 + states @ np.asarray(axis, dtype=float)) / 2.0


def log_likelihood(axis, scale: float, states: np.ndarray, counts: np.ndarray, trials: np.ndarray) -> float:
    """Poisson log-likelihood without the count-only log(c!) term"""
    lam = np.maximum(expected_counts(axis, scale, states, trials), P_FLOOR)
    return float(np.sum(counts * np.log(lam) - lam))


def _objective(params, states, counts, trials, total):
    theta, phi = params
    a = _axis(theta, phi)
    p = np.maximum((1.0 + states @ a) / 2.0, P_FLOOR)
    tp = trials @ p
    value = -(counts @ np.log(p) - total * np.log(tp)) / total

    grad_a = -((counts / p) @ states / 2.0 - total * (trials @ states / 2.0) / tp) / total
    d_theta = np.array([np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta)])
    d_phi = np.array([-np.sin(theta) * np.sin(phi), np.sin(theta) * np.cos(phi), 0.0])
    return value, np.array([grad_a @ d_theta, grad_a @ d_phi])


def _check_design(states: np.ndarray, counts: np.ndarray):
    if states.shape[0] < 4:
        raise IllPosedFitError(f"Need at least 4 probes, got {states.shape[0]}")
    design = np.hstack([np.ones((states.shape[0], 1)), states])
    if np.linalg.matrix_rank(design, tol=1e-9) < 4:
        raise IllPosedFitError("Probe input states do not span the Bloch sphere")
    if counts.sum() <= 0:
        raise IllPosedFitError("No coincidences recorded for this setting")


def fit_axis(states: np.ndarray, counts: np.ndarray, trials: np.ndarray,
             starts: Sequence[Sequence[float]] = CANONICAL_STARTS) -> AxisFit:
    """Maximum-likelihood axis from raw arrays, best of the given (theta, phi) starts"""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    counts = np.asarray(counts, dtype=float)
    trials = np.asarray(trials, dtype=float)
    _check_design(states, counts)

    total = counts.sum()
    best = None
    for start in starts:
        res = minimize(_objective, np.asarray(start, dtype=float), args=(states, counts, trials, total),
                       jac=True, method="BFGS", options={"gtol": 1e-10, "maxiter": 500})
        if not np.isfinite(res.fun):
            continue
        if best is None or res.fun < best.fun - 1e-12:
            best = res
    if best is None:
        raise IllPosedFitError("Likelihood maximization did not converge from any start")

    axis = _axis(*best.x)
    scale = total / (trials @ ((1.0 + states @ axis) / 2.0))
    return AxisFit(axis, float(scale), log_likelihood(axis, scale, states, counts, trials))


def _probe_arrays(probes: Sequence[ProbeRecord], setting: int):
    if not probes:
        raise IllPosedFitError("No probes supplied")
    if not 1 <= setting <= probes[0].settings:
        raise InvalidArgumentError(f"Setting {setting} outside 1..{probes[0].settings}")
    states = np.array([p.input_state for p in probes])
    counts = np.array([p.counts[setting - 1] for p in probes])
    trials = np.array([p.trials[setting - 1] for p in probes])
    return states, counts, trials


def fit_measurement_axis(probes: Sequence[ProbeRecord], setting: int) -> AxisFit:
    return fit_axis(*_probe_arrays(probes, setting))


def angular_spread(axes: np.ndarray, center) -> float:
    """Standard deviation along the semi-major axis of the tangent-plane scatter around `center`"""
    axes = np.atleast_2d(axes)
    if axes.shape[0] < 2:
        raise InsufficientDataError("Need at least two axes for a spread")
    c = normalize(center)
    helper = np.eye(3)[np.argmin(np.abs(c))]
    e1 = normalize(np.cross(c, helper))
    e2 = np.cross(c, e1)

    cos = np.clip(axes @ c, -1.0, 1.0)
    angle = np.arccos(cos)
    tangent = axes - cos[:, None] * c
    norm = np.linalg.norm(tangent, axis=1)
    safe = np.where(norm > 0, norm, 1.0)
    coords = np.stack([tangent @ e1, tangent @ e2], axis=1) * (angle / safe)[:, None]

    cov = np.cov(coords, rowvar=False)
    return float(np.sqrt(np.linalg.eigvalsh(cov).max()))


def draw_preparation_errors(rng: np.random.Generator,
                            retardance_tol: float = RETARDANCE_TOLERANCE_WAVES,
                            angle_sd_deg: float = ZERO_ANGLE_SD_DEG) -> PreparationErrors:
    def plate():
        return WaveplateError(rng.uniform(-retardance_tol, retardance_tol), rng.normal(0.0, angle_sd_deg))

    return PreparationErrors(hwp=plate(), qwp=plate())


def parametric_resample(probes: Sequence[ProbeRecord], rng: np.random.Generator,
                        retardance_tol: float = RETARDANCE_TOLERANCE_WAVES,
                        angle_sd_deg: float = ZERO_ANGLE_SD_DEG) -> List[ProbeRecord]:
    """
    Redraw every count from Poisson and replace each labelled input state by
    one prepared with perturbed waveplates. Probe order is kept.
    """
    errors = draw_preparation_errors(rng, retardance_tol, angle_sd_deg)
    perturbed = {label: preparation_state(label, errors) for label in PREPARATION_ANGLES}

    resampled = []
    for probe in probes:
        state = perturbed.get(probe.label, probe.input_state)
        resampled.append(ProbeRecord(probe.label, rng.poisson(probe.counts).astype(float), probe.trials, state))
    return resampled


def _bootstrap_trial(probes, seed_seq, starts_per_setting, settings):
    rng = np.random.default_rng(seed_seq)
    picks = rng.integers(0, len(probes), size=len(probes))
    sample = parametric_resample([probes[i] for i in picks], rng)
    out = []
    for j in range(settings):
        try:
            fit = fit_axis(*_probe_arrays(sample, j + 1), starts=[starts_per_setting[j], *CANONICAL_STARTS])
            out.append(fit.axis)
        except IllPosedFitError:
            out.append(None)
    return out


def bootstrap_tomography(probes: Sequence[ProbeRecord], trials: int = 10000, seed: int = 0,
                         workers: int = 1) -> TomographyEstimate:
    """
    Point estimate plus parametric-bootstrap spread for every setting.

    Each trial gets its own child of the master seed, so the result does not
    depend on the number of workers.
    """
    if trials < MIN_BOOTSTRAP_TRIALS:
        raise InvalidArgumentError(f"Need at least {MIN_BOOTSTRAP_TRIALS} bootstrap trials, got {trials}")
    if not probes:
        raise IllPosedFitError("No probes supplied")
    settings = probes[0].settings

    points = [fit_measurement_axis(probes, j + 1).axis for j in range(settings)]
    starts = [(np.arccos(np.clip(a[2], -1, 1)), np.arctan2(a[1], a[0])) for a in points]
    children = np.random.SeedSequence(seed).spawn(trials)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(lambda s: _bootstrap_trial(probes, s, starts, settings), children))
    else:
        samples = [_bootstrap_trial(probes, s, starts, settings) for s in children]

    result = TomographyEstimate(trials=trials)
    for j in range(settings):
        fitted = [s[j] for s in samples if s[j] is not None]
        failures = trials - len(fitted)
        if failures > MAX_FAILURE_FRACTION * trials:
            raise InsufficientDataError(
                f"Setting {j + 1}: {failures}/{trials} bootstrap fits failed", {"failures": failures}
            )
        if failures:
            logger.warning("Setting %d: skipped %d failed bootstrap fits", j + 1, failures)
        fitted = np.array(fitted)
        mean_axis = normalize(fitted.mean(axis=0))
        result.axes.append(BootstrapAxis(j + 1, points[j], mean_axis, angular_spread(fitted, mean_axis), failures))
        logger.info("Setting %d: axis %s, sigma %.4f", j + 1, np.round(mean_axis, 4), result.axes[-1].sigma)
    return result
