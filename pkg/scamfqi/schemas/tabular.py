# scamfqi/schemas/tabular.py - JSON files for explicitly enumerated games
from typing import List, Optional

from pydantic import BaseModel, Field, PositiveInt


class TabularGameFile(BaseModel):
    state_sizes: List[PositiveInt]
    action_sizes: List[PositiveInt]
    # P[s][a] -> probability vector over joint successor states
    P: List[List[List[float]]]
    # rewards[i][s][a] is agent i's share
    rewards: List[List[List[float]]]
    gamma: float = Field(ge=0.0, lt=1.0)
    mu: List[float]
    r_max: Optional[float] = None


class DataDistributionFile(BaseModel):
    # nu[s][a]
    nu: List[List[float]]


class OracleRequest(BaseModel):
    """Optional companion file for `scamfqi oracle`."""

    neighborhoods: Optional[List[List[int]]] = None
    iterations: PositiveInt = 10
    delta: float = Field(0.05, gt=0.0, lt=1.0)
    function_class_size: float = Field(100.0, ge=1.0)
    dataset_size: float = Field(10000.0, gt=0.0)
    tol: float = Field(1e-8, gt=0.0)
