"""
Config-driven campaign: resolve the measurement set, apply the worst-case
rotation, optimize the exchange rate and, when a simulation block is given,
simulate trials and score them against the bound.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, TypedDict

from langgraph.graph import END, StateGraph

from ..bounds.strategies import MeasurementSet
from ..experiment.simulator import ExperimentConfig, TrialCounts
from ..protocols.artifacts import ArtifactHeader, ArtifactKind, write_artifact
from ..protocols.plots import plot_purity_curves
from ..stages.pipeline_stages import BoundsStage, CalibrationStage, ExperimentStage, MeasurementStage
from ..utils.config import CampaignConfig

logger = logging.getLogger(__name__)


class CampaignState(TypedDict, total=False):
    config: CampaignConfig
    measurement: MeasurementSet
    adjusted: Dict[int, MeasurementSet]
    optima: Dict[int, Dict[str, Any]]
    curves: Dict[str, List[dict]]
    counts: Optional[TrialCounts]
    analysis: Dict[int, Dict[str, Any]]
    artifacts: List[str]
    errors: Dict[str, Any]
    step: str


class CampaignGraph:
    """measure -> conservative -> optimize -> (simulate -> analyze)"""

    def __init__(self, workers: int = 1):
        self.workers = workers
        self.measurement_stage = MeasurementStage("campaign_measurement")
        self.calibration_stage = CalibrationStage("campaign_calibration")
        self.bounds_stage = BoundsStage("campaign_bounds")
        self.experiment_stage = ExperimentStage("campaign_experiment")

        self.graph = StateGraph(CampaignState)
        self.graph.add_node("measure", self.measure)
        self.graph.add_node("conservative", self.conservative)
        self.graph.add_node("optimize", self.optimize)
        self.graph.add_node("simulate", self.simulate)
        self.graph.add_node("analyze", self.analyze)
        self.graph.set_entry_point("measure")

        def proceed(next_node):
            def route(state):
                return END if state.get("errors") else next_node
            return route

        def after_optimize(state):
            if state.get("errors") or state["config"].simulation is None:
                return END
            return "simulate"

        self.graph.add_conditional_edges("measure", proceed("conservative"), {"conservative": "conservative", END: END})
        self.graph.add_conditional_edges("conservative", proceed("optimize"), {"optimize": "optimize", END: END})
        self.graph.add_conditional_edges("optimize", after_optimize, {"simulate": "simulate", END: END})
        self.graph.add_conditional_edges("simulate", proceed("analyze"), {"analyze": "analyze", END: END})
        self.graph.add_edge("analyze", END)
        self.app = self.graph.compile()

    def _write(self, state: CampaignState, name: str, kind: ArtifactKind, frame) -> List[str]:
        config = state["config"]
        path = Path(config.output_dir) / name
        write_artifact(path, frame, ArtifactHeader(kind, config.to_dict(), config.seed))
        return state.get("artifacts", []) + [str(path)]

    @staticmethod
    def _failure(step: str, outcome: Dict[str, Any]) -> Dict[str, Any]:
        return {"errors": {step: outcome}, "step": f"{step}_failed"}

    async def measure(self, state: CampaignState):
        source = state["config"].measurement
        outcome = await self.measurement_stage.execute({
            "operation": "resolve",
            **source.model_dump(exclude_none=True),
            "seed": state["config"].seed,
            "workers": self.workers,
        })
        if not outcome["success"]:
            return self._failure("measure", outcome)
        result = outcome["result"]
        artifacts = self._write(state, "measurement_axes.csv", ArtifactKind.TOMOGRAPHY, result["frame"])
        return {"measurement": result["measurement"], "artifacts": artifacts, "step": "measured"}

    async def conservative(self, state: CampaignState):
        config = state["config"]
        meas = state["measurement"]
        adjusted = {}
        artifacts = state.get("artifacts", [])
        for d in config.d_values:
            bits = d.bit_length() - 1
            if not config.conservative or bits > 1:
                if config.conservative:
                    logger.warning("No worst-case rotation for %d message bits; using the measured axes", bits)
                adjusted[d] = meas
                continue
            outcome = await self.calibration_stage.execute({
                "operation": "conservative", "measurement": meas, "k_sigma": config.k_sigma, "bits": bits,
            })
            if not outcome["success"]:
                return self._failure("conservative", outcome)
            adjusted[d] = outcome["result"]["measurement"]
            state = {**state, "artifacts": artifacts}
            artifacts = self._write(state, f"conservative_d{d}.csv", ArtifactKind.CONSERVATIVE,
                                    outcome["result"]["frame"])
        return {"adjusted": adjusted, "artifacts": artifacts, "step": "adjusted"}

    async def optimize(self, state: CampaignState):
        config = state["config"]
        optima, curves = {}, {}
        artifacts = state.get("artifacts", [])
        for d, meas in state["adjusted"].items():
            outcome = await self.bounds_stage.execute({
                "operation": "optimize", "measurement": meas, "d": d, "eta": config.eta,
            })
            if not outcome["success"]:
                return self._failure("optimize", outcome)
            optima[d] = outcome["result"]["summary"]
            artifacts = self._write({**state, "artifacts": artifacts}, f"optimum_d{d}.csv",
                                    ArtifactKind.OPTIMIZE, outcome["result"]["frame"])

            for label, curve_meas in ((f"ideal d={d}", MeasurementSet.octahedral()), (f"measured d={d}", meas)):
                if curve_meas.n != meas.n:
                    continue
                outcome = await self.bounds_stage.execute({
                    "operation": "curve", "measurement": curve_meas, "d": d,
                    "eta_min": config.eta_min, "eta_max": 1.0, "points": config.curve_points,
                })
                if not outcome["success"]:
                    return self._failure("optimize", outcome)
                curves[label] = outcome["result"]["curve"]
                slug = label.replace(" ", "_").replace("=", "")
                artifacts = self._write({**state, "artifacts": artifacts}, f"curve_{slug}.csv",
                                        ArtifactKind.CURVE, outcome["result"]["frame"])

        png = Path(config.output_dir) / "purity_curves.png"
        plot_purity_curves(curves, png)
        return {"optima": optima, "curves": curves, "artifacts": artifacts + [str(png)], "step": "optimized"}

    async def simulate(self, state: CampaignState):
        config = state["config"]
        block = config.simulation
        experiment = ExperimentConfig.aligned(
            block.mu, state["measurement"], block.alice_efficiency, block.bob_efficiency,
            block.trials, block.dark_count, config.seed,
        )
        outcome = await self.experiment_stage.execute({"operation": "simulate", "experiment": experiment})
        if not outcome["success"]:
            return self._failure("simulate", outcome)
        artifacts = self._write(state, "counts.csv", ArtifactKind.COUNTS, outcome["result"]["frame"])
        return {"counts": outcome["result"]["counts"], "artifacts": artifacts, "step": "simulated"}

    async def analyze(self, state: CampaignState):
        config = state["config"]
        beta_plus, beta_minus = config.simulation.bob_efficiency
        counts = state["counts"]
        analysis = {}
        artifacts = state.get("artifacts", [])
        for d, optimum in state["optima"].items():
            outcome = await self.experiment_stage.execute({
                "operation": "analyze", "counts": counts, "ratios": [beta_plus / beta_minus] * counts.n,
                "r": optimum["r"], "h": optimum["h"],
            })
            if not outcome["success"]:
                return self._failure("analyze", outcome)
            analysis[d] = outcome["result"]["summary"]
            artifacts = self._write({**state, "artifacts": artifacts}, f"analysis_d{d}.csv",
                                    ArtifactKind.ANALYSIS, outcome["result"]["frame"])
        return {"analysis": analysis, "artifacts": artifacts, "step": "analyzed"}

    async def run(self, config: CampaignConfig) -> CampaignState:
        """Run the graph"""
        initial_state = CampaignState(config=config, artifacts=[], errors={}, step="start")
        return await self.app.ainvoke(initial_state)
