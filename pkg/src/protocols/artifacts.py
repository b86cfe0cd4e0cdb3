"""
CSV artifacts exchanged between subcommands.

Every file starts with '#' comment lines recording the package version, the
artifact kind, the seed and the fully resolved configuration, so a run can be
repeated from its output alone. No timestamps: identical inputs give
byte-identical files.
"""
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .. import __version__
from ..bounds.strategies import MeasurementSet
from ..calibration.efficiency import MINUS, PLUS, RateTable
from ..calibration.tomography import ProbeRecord
from ..experiment.simulator import TrialCounts
from ..utils.errors import ArtifactError

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.12g"


class ArtifactKind(Enum):
    BOUNDS = "bounds"
    OPTIMIZE = "optimize"
    CURVE = "curve"
    CONSERVATIVE = "conservative"
    TOMOGRAPHY = "tomography"
    KLYSHKO = "klyshko"
    BIAS = "bias"
    COUNTS = "counts"
    ANALYSIS = "analysis"
    FTL = "ftl"


@dataclass
class ArtifactHeader:
    kind: ArtifactKind
    config: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    version: str = __version__

    def to_lines(self) -> List[str]:
        return [
            f"# steering-bounds {self.version}",
            f"# kind: {self.kind.value}",
            f"# seed: {'none' if self.seed is None else self.seed}",
            f"# config: {json.dumps(self.config, sort_keys=True, default=_jsonable)}",
        ]


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return str(value)


def render_artifact(frame: pd.DataFrame, header: ArtifactHeader) -> str:
    buffer = io.StringIO()
    buffer.write("\n".join(header.to_lines()) + "\n")
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue()


def write_artifact(path: PathLike, frame: pd.DataFrame, header: ArtifactHeader) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_artifact(frame, header))
    return path


def read_table(path: PathLike, required: Optional[List[str]] = None) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"Input file not found: {path}")
    frame = pd.read_csv(path, comment="#", skipinitialspace=True)
    missing = set(required or []) - set(frame.columns)
    if missing:
        raise ArtifactError(f"{path} lacks columns {sorted(missing)}")
    return frame


def axes_frame(meas: MeasurementSet) -> pd.DataFrame:
    return pd.DataFrame({
        "setting": np.arange(1, meas.n + 1),
        "x": meas.axes[:, 0],
        "y": meas.axes[:, 1],
        "z": meas.axes[:, 2],
        "sigma": meas.sigmas,
    })


def load_axes(path: PathLike) -> MeasurementSet:
    frame = read_table(path, ["x", "y", "z"])
    if "setting" in frame.columns:
        frame = frame.sort_values("setting")
    sigmas = frame["sigma"].to_numpy() if "sigma" in frame.columns else None
    return MeasurementSet.from_estimates(frame[["x", "y", "z"]].to_numpy(), sigmas)


def load_probes(path: PathLike) -> List[ProbeRecord]:
    """Rows: (probe), label, setting, counts, trials, optional input-state x/y/z"""
    frame = read_table(path, ["label", "setting", "counts", "trials"])
    settings = int(frame["setting"].max())
    if "probe" not in frame.columns:
        frame = frame.assign(probe=(frame["setting"] == frame["setting"].min()).cumsum())
    has_state = {"x", "y", "z"} <= set(frame.columns)

    probes = []
    for _, group in frame.groupby("probe", sort=True):
        counts = np.zeros(settings)
        trials = np.ones(settings)
        for row in group.itertuples(index=False):
            counts[int(row.setting) - 1] = row.counts
            trials[int(row.setting) - 1] = row.trials
        first = group.iloc[0]
        state = first[["x", "y", "z"]].to_numpy(dtype=float) if has_state else None
        probes.append(ProbeRecord(str(first["label"]), counts, trials, state))
    return probes


def _outcome(symbol) -> int:
    text = str(symbol).strip()
    if text in ("+", "+1", "1"):
        return PLUS
    if text in ("-", "-1"):
        return MINUS
    raise ArtifactError(f"Outcome must be '+' or '-', got {symbol!r}")


def load_rates(path: PathLike) -> List[RateTable]:
    """Rows: (window), kind in {coincidence, alice, bob}, k, j, a, b, rate; one table per window"""
    frame = read_table(path, ["kind", "k", "j", "rate"])
    if "window" not in frame.columns:
        frame = frame.assign(window=0)
    K, J = int(frame["k"].max()), int(frame["j"].max())

    tables = []
    for _, group in frame.groupby("window", sort=True):
        coincidences = np.zeros((K, J, 2, 2))
        alice = np.zeros((K, J, 2))
        bob = np.zeros((K, J, 2))
        for row in group.itertuples(index=False):
            k, j = int(row.k) - 1, int(row.j) - 1
            if row.kind == "coincidence":
                coincidences[k, j, _outcome(row.a), _outcome(row.b)] = row.rate
            elif row.kind == "alice":
                alice[k, j, _outcome(row.a)] = row.rate
            elif row.kind == "bob":
                bob[k, j, _outcome(row.b)] = row.rate
            else:
                raise ArtifactError(f"Unknown rate kind {row.kind!r}")
        tables.append(RateTable(coincidences, alice, bob))
    return tables


def rates_frame(tables: List[RateTable]) -> pd.DataFrame:
    symbols = ("+", "-")
    rows = []
    for w, table in enumerate(tables):
        K, J = table.shape
        for k in range(K):
            for j in range(J):
                for a in (PLUS, MINUS):
                    rows.append({"window": w, "kind": "alice", "k": k + 1, "j": j + 1, "a": symbols[a], "b": "",
                                 "rate": table.alice_singles[k, j, a]})
                    for b in (PLUS, MINUS):
                        rows.append({"window": w, "kind": "coincidence", "k": k + 1, "j": j + 1,
                                     "a": symbols[a], "b": symbols[b], "rate": table.coincidences[k, j, a, b]})
                for b in (PLUS, MINUS):
                    rows.append({"window": w, "kind": "bob", "k": k + 1, "j": j + 1, "a": "", "b": symbols[b],
                                 "rate": table.bob_singles[k, j, b]})
    return pd.DataFrame(rows, columns=["window", "kind", "k", "j", "a", "b", "rate"])


def load_counts(path: PathLike) -> TrialCounts:
    return TrialCounts.from_frame(read_table(path, ["k", "j", "a", "b", "N"]))


__all__ = [
    "ArtifactKind",
    "ArtifactHeader",
    "render_artifact",
    "write_artifact",
    "read_table",
    "axes_frame",
    "load_axes",
    "load_probes",
    "load_rates",
    "rates_frame",
    "load_counts",
]
