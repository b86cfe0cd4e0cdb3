"""
steering-bounds command line.

Each subcommand runs one stage and writes a CSV artifact (to --output, or to
stdout when no path is given). Validation failures exit with 2, computation
failures with 1; either way one JSON line describing the error goes to stderr.
"""
import argparse
import asyncio
import json
import sys
from typing import Any, Dict, List, Optional, Sequence

from .. import __version__
from ..bounds.presets import PRESETS
from ..experiment.simulator import ExperimentConfig
from ..graph.campaign_graph import CampaignGraph
from ..protocols.artifacts import ArtifactHeader, render_artifact, write_artifact
from ..protocols.plots import plot_purity_curves
from ..stages.base_stage import EXIT_COMPUTATION, EXIT_VALIDATION
from ..stages.pipeline_stages import BoundsStage, CalibrationStage, ExperimentStage, MeasurementStage
from ..utils.config import SystemConfig, load_campaign
from ..utils.errors import InvalidArgumentError, SteeringError
from ..utils.logger import setup_logging

DISCREPANCY_TOLERANCE = 0.01


def emit_error(message: str, code: str, exit_code: int, details: Optional[Dict[str, Any]] = None) -> None:
    line = {"error": message, "code": code, "exit_code": exit_code}
    if details:
        line["details"] = details
    print(json.dumps(line, default=str), file=sys.stderr)


class SteeringArgumentParser(argparse.ArgumentParser):
    """argparse with the machine-readable error line and exit status 2"""

    def error(self, message):
        emit_error(f"{self.prog}: {message}", "invalid_argument", EXIT_VALIDATION)
        self.exit(EXIT_VALIDATION)


def parse_axes(text: str) -> List[List[float]]:
    """'x,y,z;x,y,z;...' -> list of 3-vectors"""
    try:
        axes = [[float(c) for c in row.split(",")] for row in text.split(";") if row.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed axes {text!r}") from None
    if not axes or any(len(row) != 3 for row in axes):
        raise argparse.ArgumentTypeError("every axis needs three comma-separated components")
    return axes


def _add_measurement_flags(parser: argparse.ArgumentParser, default_preset: Optional[str] = "octahedral"):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--preset", choices=sorted(PRESETS), help=f"named measurement set (default {default_preset})")
    group.add_argument("--octahedral", dest="preset", action="store_const", const="octahedral",
                       help="shorthand for --preset octahedral")
    group.add_argument("--axes", type=parse_axes, help="explicit axes as 'x,y,z;x,y,z;...'")
    group.add_argument("--axes-csv", help="CSV with x,y,z (and optional setting, sigma) columns")
    parser.add_argument("--sigmas", type=float, nargs="+", help="per-axis uncertainty for --axes")
    parser.set_defaults(default_preset=default_preset)


def _add_output_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--output", "-o", help="artifact path (stdout when omitted)")


def build_parser(system: Optional[SystemConfig] = None) -> SteeringArgumentParser:
    system = system or SystemConfig()
    parser = SteeringArgumentParser(prog="steering-bounds",
                                    description="Communication-assisted EPR-steering bounds and calibration")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=system.log_level)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=SteeringArgumentParser)

    p = sub.add_parser("bounds", help="steering bound h at given exchange rates")
    _add_measurement_flags(p)
    p.add_argument("--d", type=int, default=1, help="message alphabet size")
    p.add_argument("--r", type=float, nargs="+", default=[0.0], help="exchange rates")
    _add_output_flags(p)

    p = sub.add_parser("optimize", help="optimal exchange rate at a heralding efficiency")
    _add_measurement_flags(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--eta", type=float, default=0.748)
    _add_output_flags(p)

    p = sub.add_parser("curve", help="minimum purity against heralding efficiency")
    _add_measurement_flags(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--eta-min", type=float, default=0.05)
    p.add_argument("--eta-max", type=float, default=1.0)
    p.add_argument("--points", type=int, default=96)
    p.add_argument("--plot", help="also save a PNG of the curve")
    _add_output_flags(p)

    p = sub.add_parser("conservative", help="worst-case rotation of measured axes")
    _add_measurement_flags(p, default_preset="measured")
    p.add_argument("--bits", type=int, choices=[0, 1], default=0, help="message bits")
    p.add_argument("--k-sigma", type=float, default=system.k_sigma)
    p.add_argument("--exhaustive", action="store_true", help="search all signed pairs against the bound")
    p.add_argument("--r", type=float, default=0.0, help="exchange rate for --exhaustive")
    _add_output_flags(p)

    p = sub.add_parser("tomography", help="bootstrapped measurement tomography from probe counts")
    p.add_argument("--probes", required=True, help="probe CSV (label, setting, counts, trials)")
    p.add_argument("--trials", type=int, default=system.bootstrap_trials)
    p.add_argument("--seed", type=int, default=system.default_seed)
    p.add_argument("--threads", type=int, default=system.threads)
    _add_output_flags(p)

    p = sub.add_parser("klyshko", help="detector efficiencies and trusted-side ratios from rates")
    p.add_argument("--rates", required=True, help="rates CSV (window, kind, k, j, a, b, rate)")
    p.add_argument("--duration", type=float, help="seconds per window; enables error bars")
    p.add_argument("--window", type=int, help="averaging window in entries (default: Allan minimum)")
    p.add_argument("--pdl", type=float, default=0.02, help="polarization-dependent loss allowance")
    p.add_argument("--k", type=float, default=system.k_sigma, help="standard errors subtracted")
    _add_output_flags(p)

    p = sub.add_parser("bias", help="background and multi-pair bias of the efficiency formulas")
    p.add_argument("--background-rate", type=float, default=200.0)
    p.add_argument("--pair-prob", type=float, default=0.0072)
    p.add_argument("--trials", type=float, default=1e6, help="trials per second")
    p.add_argument("--pdl", type=float, default=0.0)
    _add_output_flags(p)

    p = sub.add_parser("simulate", help="simulate photon-counting trials")
    _add_measurement_flags(p)
    p.add_argument("--mu", type=float, required=True, help="Werner purity")
    p.add_argument("--alice-efficiency", type=float, default=0.748)
    p.add_argument("--bob-efficiency", type=float, nargs=2, default=[1.0, 1.0], metavar=("BETA_PLUS", "BETA_MINUS"))
    p.add_argument("--trials", type=int, default=1_000_000, help="trials per setting pair")
    p.add_argument("--dark-count", type=float, default=0.0)
    p.add_argument("--random-settings", action="store_true")
    p.add_argument("--seed", type=int, default=system.default_seed)
    _add_output_flags(p)

    p = sub.add_parser("analyze", help="score and residual of counts against the bound")
    _add_measurement_flags(p, default_preset=None)
    p.add_argument("--counts", required=True, help="counts CSV from `simulate`")
    p.add_argument("--ratios", type=float, nargs="+", help="beta_+/beta_- per setting (default 1)")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--h", type=float, help="bound value; computed from the measurement set when omitted")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--bootstrap-draws", type=int, default=0)
    p.add_argument("--seed", type=int, default=system.default_seed)
    _add_output_flags(p)

    p = sub.add_parser("ftl", help="minimum signalling speed for the communication model")
    p.add_argument("--distance", type=float, default=161.3, help="metres")
    p.add_argument("--time", type=float, default=230e-9, help="seconds")
    _add_output_flags(p)

    p = sub.add_parser("campaign", help="config-driven run of the whole pipeline")
    p.add_argument("--config", required=True, help="campaign JSON file")
    p.add_argument("--threads", type=int, default=None)

    return parser


def _measurement_task(args) -> Dict[str, Any]:
    if args.axes is not None:
        return {"axes": args.axes, "sigmas": args.sigmas}
    if args.axes_csv:
        return {"axes_csv": args.axes_csv}
    name = args.preset or args.default_preset
    if name is None:
        return {}
    return {"preset": name}


async def _resolve_measurement(args):
    task = _measurement_task(args)
    if not task:
        return None
    outcome = await MeasurementStage().execute({"operation": "resolve", **task})
    if not outcome["success"]:
        raise _StageFailure(outcome)
    return outcome["result"]["measurement"]


class _StageFailure(Exception):
    def __init__(self, outcome: Dict[str, Any]):
        super().__init__(outcome["error"])
        self.outcome = outcome


def _task_for(args, measurement) -> Dict[str, Any]:
    command = args.command
    if command == "bounds":
        return {"operation": "bounds", "measurement": measurement, "d": args.d, "r_values": args.r}
    if command == "optimize":
        return {"operation": "optimize", "measurement": measurement, "d": args.d, "eta": args.eta}
    if command == "curve":
        return {"operation": "curve", "measurement": measurement, "d": args.d,
                "eta_min": args.eta_min, "eta_max": args.eta_max, "points": args.points}
    if command == "conservative":
        return {"operation": "conservative", "measurement": measurement, "bits": args.bits,
                "k_sigma": args.k_sigma, "exhaustive": args.exhaustive, "r": args.r}
    if command == "tomography":
        return {"operation": "tomography", "probes_csv": args.probes, "trials": args.trials,
                "seed": args.seed, "workers": args.threads}
    if command == "klyshko":
        return {"operation": "klyshko", "rates_csv": args.rates, "duration": args.duration,
                "window": args.window, "pdl": args.pdl, "k": args.k}
    if command == "bias":
        return {"operation": "bias", "background_rate": args.background_rate, "pair_prob": args.pair_prob,
                "trials": args.trials, "pdl": args.pdl}
    if command == "simulate":
        experiment = ExperimentConfig.aligned(args.mu, measurement, args.alice_efficiency, args.bob_efficiency,
                                              args.trials, args.dark_count, args.seed, args.random_settings)
        return {"operation": "simulate", "experiment": experiment}
    if command == "analyze":
        return {"operation": "analyze", "counts_csv": args.counts, "ratios": args.ratios, "r": args.r,
                "h": args.h, "measurement": measurement, "d": args.d,
                "bootstrap_draws": args.bootstrap_draws, "seed": args.seed}
    if command == "ftl":
        return {"operation": "ftl", "distance": args.distance, "time": args.time}
    raise InvalidArgumentError(f"Unknown command {command!r}")


STAGE_FOR = {
    "bounds": BoundsStage,
    "optimize": BoundsStage,
    "curve": BoundsStage,
    "conservative": CalibrationStage,
    "tomography": CalibrationStage,
    "klyshko": CalibrationStage,
    "bias": CalibrationStage,
    "simulate": ExperimentStage,
    "analyze": ExperimentStage,
    "ftl": ExperimentStage,
}


def _header_config(args) -> Dict[str, Any]:
    config = {k: v for k, v in vars(args).items() if k not in ("output", "log_level", "default_preset")}
    if config.get("preset") is None and getattr(args, "default_preset", None):
        config["preset"] = args.default_preset
    return config


def _report(args, result: Dict[str, Any]) -> None:
    header = ArtifactHeader(result["kind"], _header_config(args), getattr(args, "seed", None))
    if args.output:
        path = write_artifact(args.output, result["frame"], header)
        print(f"✅ {args.command}: wrote {path}")
        for key, value in result["summary"].items():
            print(f"   {key}: {value}")
    else:
        sys.stdout.write(render_artifact(result["frame"], header))

    if args.command == "curve" and args.plot:
        plot_purity_curves({f"d={args.d}": result["curve"]}, args.plot)
        print(f"📈 curve plot saved to {args.plot}", file=sys.stderr)

    if args.command == "ftl":
        summary = result["summary"]
        quoted = summary["quoted_speed_m_s"]
        gap = abs(summary["speed_m_s"] - quoted) / quoted
        if gap > DISCREPANCY_TOLERANCE:
            print(f"⚠️  distance/time gives {summary['speed_m_s']:.3g} m/s "
                  f"({summary['speed_over_c']:.2f} c); the quoted figure {quoted:.3g} m/s differs by {gap:.0%}",
                  file=sys.stderr)


async def _run_stage(args) -> int:
    measurement = await _resolve_measurement(args) if hasattr(args, "preset") else None
    stage = STAGE_FOR[args.command]()
    outcome = await stage.execute(_task_for(args, measurement))
    if not outcome["success"]:
        raise _StageFailure(outcome)
    _report(args, outcome["result"])
    return 0


async def _run_campaign(args, system: SystemConfig) -> int:
    config = load_campaign(args.config)
    workers = args.threads or config.threads or system.threads
    print(f"🚀 Campaign: {args.config} -> {config.output_dir}")
    state = await CampaignGraph(workers).run(config)
    if state.get("errors"):
        step, outcome = next(iter(state["errors"].items()))
        print(f"❌ Campaign stopped at {step}")
        raise _StageFailure(outcome)

    for d, optimum in state.get("optima", {}).items():
        print(f"   d={d}: r*={optimum['r']:.4f} h*={optimum['h']:.4f} mu_min={optimum['mu_min']:.4f}")
    for d, report in state.get("analysis", {}).items():
        print(f"   d={d}: residual={report['residual']:+.5f} ± {report['standard_error']:.5f}")
    for path in state.get("artifacts", []):
        print(f"   📄 {path}")
    print("🎉 Campaign complete")
    return 0


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        system = SystemConfig.load()
    except SteeringError as e:
        emit_error(str(e), e.code, EXIT_VALIDATION, e.details)
        return EXIT_VALIDATION

    parser = build_parser(system)
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        if args.command == "campaign":
            return asyncio.run(_run_campaign(args, system))
        return asyncio.run(_run_stage(args))
    except _StageFailure as failure:
        outcome = failure.outcome
        emit_error(outcome["error"], outcome["error_code"], outcome["exit_code"], outcome.get("details"))
        return outcome["exit_code"]
    except SteeringError as e:
        exit_code = EXIT_VALIDATION if isinstance(e, InvalidArgumentError) else EXIT_COMPUTATION
        emit_error(str(e), e.code, exit_code, e.details)
        return exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
