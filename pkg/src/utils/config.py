import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigValidationError

load_dotenv()


def _env(name: str, default: str) -> str:
    return os.getenv(name, default)


@dataclass
class SystemConfig:
    """Process-wide defaults read from the environment (.env honoured)"""

    # Execution
    threads: int = field(default_factory=lambda: int(_env("STEERING_THREADS", "1")))
    default_seed: int = field(default_factory=lambda: int(_env("STEERING_SEED", "0")))
    log_level: str = field(default_factory=lambda: _env("LOG_LEVEL", "INFO"))

    # Numerical defaults
    k_sigma: float = field(default_factory=lambda: float(_env("STEERING_K_SIGMA", "5")))
    bootstrap_trials: int = field(default_factory=lambda: int(_env("STEERING_BOOTSTRAP_TRIALS", "10000")))

    def validate(self):
        """Validate configuration"""
        if self.threads < 1:
            raise ConfigValidationError(f"STEERING_THREADS must be >= 1, got {self.threads}")
        if self.default_seed < 0:
            raise ConfigValidationError(f"STEERING_SEED must be non-negative, got {self.default_seed}")
        if self.k_sigma < 0:
            raise ConfigValidationError(f"STEERING_K_SIGMA must be non-negative, got {self.k_sigma}")
        if self.bootstrap_trials < 100:
            raise ConfigValidationError("STEERING_BOOTSTRAP_TRIALS must be at least 100")
        if self.log_level.upper() not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ConfigValidationError(f"Unknown LOG_LEVEL {self.log_level!r}")

    @classmethod
    def load(cls):
        """Load and validate configuration"""
        try:
            config = cls()
        except ValueError as e:
            raise ConfigValidationError(f"Malformed environment setting: {e}") from e
        config.validate()
        return config

    def to_dict(self):
        return {
            "threads": self.threads,
            "default_seed": self.default_seed,
            "log_level": self.log_level,
            "k_sigma": self.k_sigma,
            "bootstrap_trials": self.bootstrap_trials,
        }


class MeasurementSource(BaseModel):
    """Where the trusted party's measurement set comes from; exactly one source"""

    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = None
    axes: Optional[List[List[float]]] = None
    sigmas: Optional[List[float]] = None
    axes_csv: Optional[str] = None
    probes_csv: Optional[str] = None
    bootstrap_trials: int = Field(default=10000, ge=100)

    @model_validator(mode="after")
    def _one_source(self):
        given = [s for s in (self.preset, self.axes, self.axes_csv, self.probes_csv) if s is not None]
        if len(given) != 1:
            raise ValueError("exactly one of preset, axes, axes_csv, probes_csv is required")
        if self.axes is not None:
            if any(len(row) != 3 for row in self.axes):
                raise ValueError("every axis needs three components")
            if self.sigmas is not None and len(self.sigmas) != len(self.axes):
                raise ValueError("sigmas must match axes in length")
        return self


class SimulationBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mu: float = Field(ge=0.0, le=1.0)
    alice_efficiency: float = Field(default=0.748, gt=0.0, le=1.0)
    bob_efficiency: List[float] = Field(default_factory=lambda: [1.0, 1.0])
    trials: int = Field(default=1_000_000, ge=0)
    dark_count: float = Field(default=0.0, ge=0.0, lt=1.0)

    @field_validator("bob_efficiency")
    @classmethod
    def _two_outcomes(cls, value):
        if len(value) != 2 or not all(0.0 < v <= 1.0 for v in value):
            raise ValueError("bob_efficiency must be [beta_plus, beta_minus] in (0, 1]")
        return value


class CampaignConfig(BaseModel):
    """Config file for the `campaign` subcommand"""

    model_config = ConfigDict(extra="forbid")

    measurement: MeasurementSource
    d_values: List[int] = Field(default_factory=lambda: [1, 2])
    conservative: bool = True
    k_sigma: float = Field(default=5.0, ge=0.0)
    eta: float = Field(default=0.748, gt=0.0, le=1.0)
    curve_points: int = Field(default=96, ge=2)
    eta_min: float = Field(default=0.05, gt=0.0, le=1.0)
    simulation: Optional[SimulationBlock] = None
    seed: int = Field(default=0, ge=0)
    threads: Optional[int] = Field(default=None, ge=1)
    output_dir: str = "campaign_output"

    @field_validator("d_values")
    @classmethod
    def _powers_of_two(cls, value):
        if not value:
            raise ValueError("d_values must not be empty")
        for d in value:
            if d < 1 or d & (d - 1):
                raise ValueError(f"message alphabet size {d} is not a power of two")
        return value

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def load_campaign(path: Union[str, Path]) -> CampaignConfig:
    """Read and validate a campaign JSON file"""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigValidationError(f"Config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigValidationError(f"Config file {path} is not valid JSON: {e}") from e

    try:
        return CampaignConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigValidationError(
            f"Invalid campaign config {path}", {"errors": e.errors(include_url=False)}
        ) from e
