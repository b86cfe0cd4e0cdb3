"""
Concrete stages; each dispatches on task["operation"] and returns a result
dict carrying the artifact kind, a pandas frame for the CSV, a summary and
the library objects for downstream stages.
"""
import asyncio
import logging
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from ..bounds.optimize import efficiency_grid, optimal_gain, tsirelson
from ..bounds.presets import preset
from ..bounds.strategies import MeasurementSet, StrategySpace, steering_bound
from ..calibration.conservative import (
    worst_case_no_message,
    worst_case_one_bit,
    worst_case_one_bit_exhaustive,
)
from ..calibration.efficiency import (
    allan_deviation,
    average_rates,
    bias_study,
    bob_ratio,
    conservative_ratio,
    estimate_efficiencies,
    optimal_window,
    windowed_ratios,
)
from ..calibration.tomography import bootstrap_tomography
from ..experiment.estimator import bootstrap_standard_error, estimate
from ..experiment.simulator import simulate
from ..experiment.spacetime import QUOTED_SPEED_M_S, ftl_speed
from ..protocols.artifacts import ArtifactKind, axes_frame, load_axes, load_counts, load_probes, load_rates
from ..utils.errors import InvalidArgumentError
from .base_stage import BaseStage

logger = logging.getLogger(__name__)


def _require(task: Dict[str, Any], key: str):
    if task.get(key) is None:
        raise InvalidArgumentError(f"Missing required argument '{key}'")
    return task[key]


def _unknown(stage: BaseStage, operation: str):
    raise InvalidArgumentError(f"Stage {stage.stage_type} has no operation {operation!r}")


class MeasurementStage(BaseStage):
    """Resolves the trusted party's measurement set from a preset, axes, a CSV or raw probes"""

    def __init__(self, stage_id: str = None, config: Optional[Dict[str, Any]] = None):
        super().__init__(stage_id or "measurement", "measurement", config)

    async def process(self, task: Dict[str, Any]) -> Dict[str, Any]:
        operation = task.get("operation", "resolve")
        if operation != "resolve":
            _unknown(self, operation)

        tomography = None
        if task.get("measurement") is not None:
            meas = task["measurement"]
        elif task.get("preset"):
            meas = preset(task["preset"])
        elif task.get("axes") is not None:
            meas = MeasurementSet.from_estimates(task["axes"], task.get("sigmas"))
        elif task.get("axes_csv"):
            meas = load_axes(task["axes_csv"])
        elif task.get("probes_csv"):
            probes = load_probes(task["probes_csv"])
            tomography = await asyncio.to_thread(
                bootstrap_tomography, probes, task.get("bootstrap_trials", 10000),
                task.get("seed", 0), task.get("workers", 1),
            )
            meas = tomography.to_measurement_set()
        else:
            raise InvalidArgumentError("No measurement source given")

        return {
            "kind": ArtifactKind.TOMOGRAPHY,
            "measurement": meas,
            "tomography": tomography,
            "frame": axes_frame(meas),
            "summary": {"settings": meas.n},
        }


class BoundsStage(BaseStage):
    """Steering bounds, gain optimization and minimum-purity curves"""

    def __init__(self, stage_id: str = None, config: Optional[Dict[str, Any]] = None):
        super().__init__(stage_id or "bounds", "bounds", config)

    async def process(self, task: Dict[str, Any]) -> Dict[str, Any]:
        operation = task.get("operation", "bounds")
        meas = _require(task, "measurement")
        d = int(task.get("d", 1))

        if operation == "bounds":
            return await asyncio.to_thread(self._bounds, meas, d, task.get("r_values", [0.0]))
        elif operation == "optimize":
            return await asyncio.to_thread(self._optimize, meas, d, float(_require(task, "eta")))
        elif operation == "curve":
            etas = task.get("etas")
            if etas is None:
                etas = efficiency_grid(task.get("eta_min", 0.05), task.get("eta_max", 1.0), task.get("points", 96))
            return await asyncio.to_thread(self._curve, meas, d, etas)
        else:
            _unknown(self, operation)

    def _bounds(self, meas: MeasurementSet, d: int, r_values) -> Dict[str, Any]:
        space = StrategySpace(meas, d)
        rows, results = [], []
        for r in r_values:
            result = steering_bound(meas, d, float(r), space=space)
            results.append(result)
            row = {"r": result.r, "h": result.h, "m": result.strategy.m,
                   "alpha": " ".join(str(a) for a in result.strategy.alpha),
                   "ell": " ".join(str(l) for l in result.strategy.ell)}
            for label, state in enumerate(result.ensemble.states, start=1):
                row[f"state_{label}"] = "" if state is None else " ".join(f"{c:.12g}" for c in state)
            rows.append(row)
        return {"kind": ArtifactKind.BOUNDS, "bounds": results, "frame": pd.DataFrame(rows),
                "summary": {"d": d, "points": len(rows)}}

    def _optimize(self, meas: MeasurementSet, d: int, eta: float) -> Dict[str, Any]:
        optimum = optimal_gain(meas, d, eta)
        row = {"d": d, "eta": eta, "r": optimum.r, "h": optimum.h, "mu_min": optimum.mu_min,
               "violable": optimum.violable, "tsirelson": tsirelson(meas, d)}
        return {"kind": ArtifactKind.OPTIMIZE, "optimum": optimum, "frame": pd.DataFrame([row]), "summary": row}

    def _curve(self, meas: MeasurementSet, d: int, etas) -> Dict[str, Any]:
        space = StrategySpace(meas, d)
        rows = []
        for eta in etas:
            optimum = optimal_gain(meas, d, float(eta), space)
            rows.append({"d": d, "eta": float(eta), "r": optimum.r, "h": optimum.h, "mu_min": optimum.mu_min})
        return {"kind": ArtifactKind.CURVE, "curve": rows, "frame": pd.DataFrame(rows),
                "summary": {"d": d, "points": len(rows), "mu_min_at_max_eta": rows[-1]["mu_min"]}}


class CalibrationStage(BaseStage):
    """Worst-case axis rotation, tomography bootstrap, detector efficiencies and bias study"""

    def __init__(self, stage_id: str = None, config: Optional[Dict[str, Any]] = None):
        super().__init__(stage_id or "calibration", "calibration", config)

    async def process(self, task: Dict[str, Any]) -> Dict[str, Any]:
        operation = task.get("operation", "conservative")

        if operation == "conservative":
            return await asyncio.to_thread(self._conservative, task)
        elif operation == "tomography":
            return await self._tomography(task)
        elif operation == "klyshko":
            return await asyncio.to_thread(self._klyshko, task)
        elif operation == "bias":
            return await asyncio.to_thread(self._bias, task)
        else:
            _unknown(self, operation)

    def _conservative(self, task: Dict[str, Any]) -> Dict[str, Any]:
        meas = _require(task, "measurement")
        k_sigma = float(task.get("k_sigma", 5.0))
        bits = int(task.get("bits", 0))
        if bits == 0:
            adjusted = worst_case_no_message(meas, k_sigma)
        elif bits == 1 and task.get("exhaustive"):
            adjusted = worst_case_one_bit_exhaustive(meas, k_sigma, float(task.get("r", 0.0)))
        elif bits == 1:
            adjusted = worst_case_one_bit(meas, k_sigma)
        else:
            raise InvalidArgumentError(f"Worst-case rotation is defined for 0 or 1 message bits, got {bits}")

        frame = axes_frame(adjusted.measurement).assign(sign=list(adjusted.signs))
        return {"kind": ArtifactKind.CONSERVATIVE, "measurement": adjusted.measurement, "adjustment": adjusted,
                "frame": frame, "summary": {"bits": bits, "members": list(adjusted.members), "k_sigma": k_sigma}}

    async def _tomography(self, task: Dict[str, Any]) -> Dict[str, Any]:
        probes = task.get("probes")
        if probes is None:
            probes = load_probes(_require(task, "probes_csv"))
        trials = int(task.get("trials", 10000))
        result = await asyncio.to_thread(bootstrap_tomography, probes, trials, int(task.get("seed", 0)),
                                         int(task.get("workers", 1)))
        frame = pd.DataFrame([a.to_dict() for a in result.axes])
        return {"kind": ArtifactKind.TOMOGRAPHY, "tomography": result, "measurement": result.to_measurement_set(),
                "frame": frame, "summary": {"probes": len(probes), "trials": trials,
                                            "sigmas": [a.sigma for a in result.axes]}}

    def _klyshko(self, task: Dict[str, Any]) -> Dict[str, Any]:
        series = task.get("rates")
        if series is None:
            series = load_rates(_require(task, "rates_csv"))
        duration = task.get("duration")
        pdl = float(task.get("pdl", 0.02))
        k = float(task.get("k", 5.0))

        # one time-averaged table for the point estimate
        overall = average_rates(series)
        total_duration = None if duration is None else float(duration) * len(series)
        rows = estimate_efficiencies(overall, total_duration).rows()

        summary: Dict[str, Any] = {"entries": len(series)}
        if len(series) >= 4 and duration is not None:
            window = task.get("window")
            for row in rows:
                j = row["setting"]
                per_entry = [bob_ratio(t, j) for t in series]
                w = int(window) if window else optimal_window(per_entry)
                values, errors = windowed_ratios(series, j, w, float(duration))
                row.update({
                    "window": w,
                    "windows": len(values),
                    "allan_deviation": allan_deviation(per_entry, w) if len(per_entry) >= 2 * w else np.nan,
                    "conservative_ratio": conservative_ratio(values, errors, pdl, k),
                })
            summary["pdl"] = pdl
            summary["k"] = k
        return {"kind": ArtifactKind.KLYSHKO, "frame": pd.DataFrame(rows), "summary": summary}

    def _bias(self, task: Dict[str, Any]) -> Dict[str, Any]:
        report = bias_study(
            background_rate=float(task.get("background_rate", 200.0)),
            pair_prob=float(task.get("pair_prob", 0.0072)),
            trials=float(task.get("trials", 1e6)),
            pdl_fraction=float(task.get("pdl", 0.0)),
        )
        return {"kind": ArtifactKind.BIAS, "report": report, "frame": pd.DataFrame(report.rows()),
                "summary": {"worst_relative_error": report.worst_relative_error}}


class ExperimentStage(BaseStage):
    """Trial simulation, score estimation and the signalling-speed check"""

    def __init__(self, stage_id: str = None, config: Optional[Dict[str, Any]] = None):
        super().__init__(stage_id or "experiment", "experiment", config)

    async def process(self, task: Dict[str, Any]) -> Dict[str, Any]:
        operation = task.get("operation", "simulate")

        if operation == "simulate":
            config = _require(task, "experiment")
            counts = await asyncio.to_thread(simulate, config)
            return {"kind": ArtifactKind.COUNTS, "counts": counts, "frame": counts.to_frame(),
                    "seed": config.seed, "summary": {"trials": int(counts.counts.sum())}}
        elif operation == "analyze":
            return await asyncio.to_thread(self._analyze, task)
        elif operation == "ftl":
            bound = ftl_speed(float(task.get("distance", 161.3)), float(task.get("time", 230e-9)))
            row = bound.to_dict()
            row["quoted_speed_m_s"] = QUOTED_SPEED_M_S
            return {"kind": ArtifactKind.FTL, "bound": bound, "frame": pd.DataFrame([row]), "summary": row}
        else:
            _unknown(self, operation)

    def _analyze(self, task: Dict[str, Any]) -> Dict[str, Any]:
        counts = task.get("counts")
        if counts is None:
            counts = load_counts(_require(task, "counts_csv"))
        ratios = task.get("ratios")
        if ratios is None:
            ratios = np.ones(counts.n)
        r = float(_require(task, "r"))
        h = task.get("h")
        if h is None and task.get("measurement") is not None:
            h = steering_bound(task["measurement"], int(task.get("d", 1)), r).h

        report = estimate(counts, ratios, r, h)
        draws = int(task.get("bootstrap_draws", 0))
        summary = report.to_dict()
        if draws:
            summary["bootstrap_standard_error"] = bootstrap_standard_error(counts, ratios, r, draws,
                                                                           int(task.get("seed", 0)))
        frame = pd.DataFrame(report.rows())
        for key, value in summary.items():
            frame[key] = value
        return {"kind": ArtifactKind.ANALYSIS, "report": report, "frame": frame, "summary": summary}


STAGES = {
    "measurement": MeasurementStage,
    "bounds": BoundsStage,
    "calibration": CalibrationStage,
    "experiment": ExperimentStage,
}
