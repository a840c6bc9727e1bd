# scamfqi/schemas/reports.py
from typing import List, Optional

from pydantic import BaseModel, Field, NonNegativeFloat, PositiveInt


class BoundInputs(BaseModel):
    eps_r: NonNegativeFloat = 0.0
    eps_P: NonNegativeFloat = 0.0
    eps_inh: NonNegativeFloat = 0.0
    C: NonNegativeFloat = 1.0
    V_max: NonNegativeFloat
    K: PositiveInt
    N: PositiveInt
    gamma: float
    delta: float = 0.05
    # None stands for an unbounded dataset: the sampling term vanishes
    dataset_size: Optional[float] = None
    function_class_size: float = Field(1.0, ge=1.0)
    cmi_per_agent: List[NonNegativeFloat] = []


class BoundReport(BoundInputs):
    bias_term: NonNegativeFloat
    sampling_term: NonNegativeFloat
    inherent_term: NonNegativeFloat
    bound_value: NonNegativeFloat

    # diagnostics filled in by the tabular pipeline
    eps_restricted_per_agent: List[NonNegativeFloat] = []
    sigma_sq_per_agent: List[NonNegativeFloat] = []
    concentrability_universal: Optional[float] = None
    generalization_value: Optional[float] = None
    observed_gap: Optional[float] = None
