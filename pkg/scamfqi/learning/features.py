# scamfqi/learning/features.py - numeric embedding of (s_{N_i}, a_i)
from dataclasses import dataclass

import numpy as np

from scamfqi.core.errors import ArgumentError
from scamfqi.models.game import MarkovGame
from scamfqi.models.sharing import neighborhood
from scamfqi.schemas.graph import Observation, ObservationMode, SharingGraph


@dataclass(frozen=True)
class FeatureSchema:
    """Slot layout for one agent: member blocks in id order, then the action one-hot."""

    owner: int
    members: tuple[int, ...]
    mode: ObservationMode
    member_widths: tuple[int, ...]
    action_count: int

    @classmethod
    def for_agent(cls, env: MarkovGame, graph: SharingGraph, owner: int, mode: ObservationMode) -> "FeatureSchema":
        members = neighborhood(graph, owner)
        widths = tuple(env.feature_width(j == owner or mode == ObservationMode.FULL) for j in members)
        return cls(owner, members, ObservationMode(mode), widths, env.action_counts[owner])

    @property
    def width(self) -> int:
        return sum(self.member_widths) + self.action_count

    @property
    def slot_names(self) -> list[str]:
        names = [f"s{j}[{k}]" for j, w in zip(self.members, self.member_widths) for k in range(w)]
        return names + [f"a{self.owner}={a}" for a in range(self.action_count)]

    def check(self, obs: Observation) -> None:
        if obs.owner != self.owner or obs.members != self.members or obs.mode != self.mode:
            raise ArgumentError(
                f"observation (owner={obs.owner}, members={obs.members}, mode={obs.mode.value}) "
                f"does not match schema (owner={self.owner}, members={self.members}, mode={self.mode.value})"
            )


def state_features(obs: Observation, schema: FeatureSchema, env: MarkovGame) -> list[float]:
    schema.check(obs)
    out: list[float] = []
    for j, value, width in zip(obs.members, obs.values, schema.member_widths):
        slot = env.featurize(value, j == schema.owner or schema.mode == ObservationMode.FULL)
        if len(slot) != width:
            raise ArgumentError(f"member {j} featurized to {len(slot)} slots, schema expects {width}")
        out.extend(slot)
    return out


def encode(obs: Observation, action: int, schema: FeatureSchema, env: MarkovGame) -> np.ndarray:
    if not 0 <= action < schema.action_count:
        raise ArgumentError(f"action {action} outside [0, {schema.action_count})")
    one_hot = [0.0] * schema.action_count
    one_hot[action] = 1.0
    return np.asarray(state_features(obs, schema, env) + one_hot, dtype=float)


def encode_all_actions(obs: Observation, schema: FeatureSchema, env: MarkovGame) -> np.ndarray:
    """(action_count, width) block: one row per action of the owner."""
    base = np.asarray(state_features(obs, schema, env), dtype=float)
    rows = np.tile(base, (schema.action_count, 1))
    return np.hstack([rows, np.eye(schema.action_count)])
