# scamfqi/schemas/experiment.py - experiment configs and aggregated results
import json
import os
from typing import List, Optional

from pydantic import BaseModel, Field, NonNegativeInt, PositiveInt, field_validator, model_validator

from scamfqi.core.config import DEFAULT_BOOTSTRAP_RESAMPLES, DEFAULT_CI_LEVEL, DEFAULT_EPSILON, DEFAULT_GAMMA, N_JOBS
from scamfqi.core.errors import ConfigError
from scamfqi.schemas.graph import ObservationMode
from scamfqi.schemas.tabular import OracleRequest
from scamfqi.schemas.training import ExtraTreesParams

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


class TabularStudy(BaseModel):
    game: str
    distribution: Optional[str] = None
    request: OracleRequest = OracleRequest()


class ExperimentConfig(BaseModel):
    scenario: str = "scenarios/desk.json"
    d_values: List[NonNegativeInt] = [2]
    modes: List[ObservationMode] = [ObservationMode.FULL]
    episodes_collect: PositiveInt = 1000
    episodes_eval: PositiveInt = 20
    K: PositiveInt = 10
    seeds: List[int] = [0, 1, 2, 3, 4]
    gamma: float = Field(DEFAULT_GAMMA, ge=0.0, lt=1.0)
    epsilon: float = Field(DEFAULT_EPSILON, ge=0.0, le=1.0)
    trees: ExtraTreesParams = ExtraTreesParams()
    # overrides the scenario's horizon when set
    horizon: Optional[PositiveInt] = None
    output_dir: Optional[str] = None
    bootstrap_resamples: PositiveInt = DEFAULT_BOOTSTRAP_RESAMPLES
    ci_level: float = Field(DEFAULT_CI_LEVEL, gt=0.0, lt=1.0)
    n_jobs: int = N_JOBS
    save_datasets: bool = True
    save_checkpoints: bool = True
    tabular: Optional[TabularStudy] = None

    @field_validator("d_values", "modes")
    @classmethod
    def non_empty(cls, v):
        if not v:
            raise ValueError("sweeps must be non-empty")
        return v

    @model_validator(mode="after")
    def distinct_seeds(self):
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        return self

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        """TOML or JSON; relative scenario/game paths resolve against the config's folder first."""
        try:
            with open(path, "rb") as f:
                raw = tomllib.load(f) if path.endswith(".toml") else json.load(f)
            config = cls.model_validate(raw)
        except (OSError, ValueError) as e:
            raise ConfigError(f"Invalid experiment config {path}: {e}") from e
        base = os.path.dirname(os.path.abspath(path))
        updates = {"scenario": _resolve(config.scenario, base)}
        if config.tabular is not None:
            tab = config.tabular
            updates["tabular"] = tab.model_copy(
                update={
                    "game": _resolve(tab.game, base),
                    "distribution": _resolve(tab.distribution, base) if tab.distribution else None,
                }
            )
        return config.model_copy(update=updates)


def _resolve(path: str, base: str) -> str:
    if os.path.isabs(path) or os.path.exists(path):
        return path
    candidate = os.path.join(base, path)
    return candidate if os.path.exists(candidate) else path


class CurvePoint(BaseModel):
    d: int
    mode: ObservationMode
    iteration: int
    mean_makespan: float
    ci_low: float
    ci_high: float
    mean_return: float
    seeds: List[int]
    seed_values: List[float]

    @model_validator(mode="after")
    def ordered_interval(self):
        if not self.ci_low <= self.mean_makespan <= self.ci_high:
            raise ValueError("ci_low <= mean <= ci_high violated")
        return self

    @property
    def label(self) -> str:
        return f"d={self.d} {self.mode.value}"
