# scamfqi/schemas/dataset.py - offline per-agent datasets and their manifest
import math
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from scamfqi.schemas.graph import Observation, ObservationMode, SharingGraph


class TransitionRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    obs: Observation
    action: int
    reward: float
    next_obs: Observation
    done: bool
    episode: int
    step: int

    @field_validator("reward")
    @classmethod
    def finite_reward(cls, v):
        if not math.isfinite(v):
            raise ValueError("reward must be finite")
        return v

    @model_validator(mode="after")
    def same_members(self):
        if self.obs.members != self.next_obs.members:
            raise ValueError("obs and next_obs must share members")
        return self


class DatasetMeta(BaseModel):
    seed: int
    episode_count: int
    horizon: int
    env_id: str
    behavior_policy_id: str = "uniform"
    reward_shift: float = 0.0


class DatasetHeader(BaseModel):
    """First line of every agent_<i>.jsonl file."""

    owner: int
    members: List[int]
    mode: ObservationMode
    meta: DatasetMeta


class AgentDataset(BaseModel):
    owner: int
    members: List[int]
    mode: ObservationMode
    records: List[TransitionRecord] = []
    meta: DatasetMeta

    @model_validator(mode="after")
    def records_share_layout(self):
        members = tuple(self.members)
        for r in self.records:
            if r.obs.owner != self.owner or r.obs.members != members or r.obs.mode != self.mode:
                raise ValueError(f"record (episode {r.episode}, step {r.step}) does not belong to agent {self.owner}")
        return self

    @property
    def header(self) -> DatasetHeader:
        return DatasetHeader(owner=self.owner, members=self.members, mode=self.mode, meta=self.meta)


class Manifest(BaseModel):
    env_id: str
    graph: Optional[SharingGraph] = None
    mode: Optional[ObservationMode] = None
    seed: Optional[int] = None
    episodes: int = 0
    horizon: int = 0
    reward_shift: float = 0.0
    behavior_policy_id: str = "uniform"
    # file name -> sha256 of its bytes
    digests: Dict[str, str] = {}
    record_counts: Dict[str, int] = {}
