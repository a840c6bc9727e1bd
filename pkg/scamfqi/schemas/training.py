# scamfqi/schemas/training.py
from typing import Literal, Optional

from pydantic import BaseModel, Field, PositiveInt, field_validator

from scamfqi.core.config import DEFAULT_EPSILON, DEFAULT_GAMMA, N_JOBS


class ExtraTreesParams(BaseModel):
    n_trees: PositiveInt = 50
    k_splits_per_feature: PositiveInt = 1
    min_samples_split: int = Field(2, ge=2)
    max_depth: Optional[PositiveInt] = None
    seed: int = 0
    n_jobs: int = N_JOBS

    @field_validator("k_splits_per_feature")
    @classmethod
    def single_split(cls, v):
        # scikit-learn draws exactly one random threshold per candidate feature
        if v != 1:
            raise ValueError("only one random split per feature is supported")
        return v


class TrainConfig(BaseModel):
    K: PositiveInt = 10
    gamma: float = Field(DEFAULT_GAMMA, ge=0.0, lt=1.0)
    epsilon_greedy: float = Field(DEFAULT_EPSILON, ge=0.0, le=1.0)
    regressor: Literal["extra_trees", "tabular"] = "extra_trees"
    trees: ExtraTreesParams = ExtraTreesParams()
    clip_to_vmax: bool = True
    terminal_bootstrap_zero: bool = True
    # bootstrap value used at done; 0 unless rewards were shifted
    terminal_value: float = 0.0


class IterationLog(BaseModel):
    iteration: int
    agent: int
    train_mse: float
    wall_time: float
