# scamfqi/schemas/graph.py - sharing graph and observation schemas
from enum import Enum
from typing import Tuple

from pydantic import BaseModel, ConfigDict, PositiveInt, field_validator, model_validator

EncodedState = Tuple[int, ...]


class ObservationMode(str, Enum):
    FULL = "full"
    COMPRESSED = "compressed"


class SharingGraph(BaseModel):
    """Directed sharing graph: edge (i, j) means j shares its state with i."""

    model_config = ConfigDict(frozen=True)

    agent_count: PositiveInt
    edges: Tuple[Tuple[int, int], ...] = ()

    @model_validator(mode="after")
    def check_edges(self):
        for i, j in self.edges:
            if not (0 <= i < self.agent_count and 0 <= j < self.agent_count):
                raise ValueError(f"Edge ({i}, {j}) references an agent outside [0, {self.agent_count})")
        # self-observation is mandatory
        normalized = sorted(set(self.edges) | {(i, i) for i in range(self.agent_count)})
        object.__setattr__(self, "edges", tuple(normalized))
        return self

    def to_json(self) -> str:
        return self.model_dump_json()

    @classmethod
    def from_json(cls, raw: str) -> "SharingGraph":
        return cls.model_validate_json(raw)


class Observation(BaseModel):
    model_config = ConfigDict(frozen=True)

    owner: int
    members: Tuple[int, ...]
    values: Tuple[EncodedState, ...]
    mode: ObservationMode

    @field_validator("members")
    @classmethod
    def members_sorted(cls, v):
        if list(v) != sorted(set(v)):
            raise ValueError("members must be sorted ascending without duplicates")
        return v

    @model_validator(mode="after")
    def check_alignment(self):
        if len(self.values) != len(self.members):
            raise ValueError("values must align with members")
        if self.owner not in self.members:
            raise ValueError(f"owner {self.owner} is not among members {self.members}")
        return self

    def value_of(self, agent: int) -> EncodedState:
        return self.values[self.members.index(agent)]
