# scamfqi/schemas/scenario.py - production plant scenario files
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, NonNegativeInt, PositiveInt

REMOVE_OP = 0


class LayoutSpec(BaseModel):
    rows: PositiveInt
    cols: PositiveInt
    # explicit undirected links override the 8-neighborhood grid
    links: Optional[List[List[NonNegativeInt]]] = None


class OperationSpec(BaseModel):
    id: NonNegativeInt
    duration: PositiveInt = 1


class ProductSpec(BaseModel):
    ops: List[NonNegativeInt]


class ScenarioFile(BaseModel):
    name: str = "scenario"
    layout: LayoutSpec
    operations: List[OperationSpec]
    # agent id (as string, JSON keys) -> operation ids it can perform
    capabilities: Dict[str, List[NonNegativeInt]] = {}
    products: List[ProductSpec]
    entries: List[NonNegativeInt]
    exits: List[NonNegativeInt]
    horizon: PositiveInt = 500
    reward_reseen_by: Literal["self", "any"] = "self"
    busy_means_processing_only: bool = False
    gamma: float = Field(0.99, ge=0.0, lt=1.0)
