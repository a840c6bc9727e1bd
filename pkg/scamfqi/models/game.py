# scamfqi/models/game.py - factored Markov game contract
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Hashable, Protocol, Sequence, Tuple

import numpy as np

from scamfqi.schemas.graph import EncodedState, ObservationMode


@dataclass(frozen=True)
class FactoredState:
    """Joint state: one opaque hashable local state per agent."""

    components: Tuple[Hashable, ...]
    clock: int = 0

    @property
    def agent_count(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class StepResult:
    state: FactoredState
    rewards: Tuple[float, ...]
    done: bool
    # actions actually executed after illegal picks were coerced
    actions: Tuple[int, ...]
    # what each agent acted on (product id for the plant, None when idle)
    targets: Tuple[Any, ...] = ()
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BufferedStep:
    """One tick of an episode as held by the collector before rewards are final."""

    tick: int
    state: FactoredState
    result: StepResult

    @property
    def rewards(self) -> Tuple[float, ...]:
        return self.result.rewards


class ObservationEncoder(Protocol):
    def encode(self, local_state: Hashable, mode: ObservationMode) -> EncodedState: ...


class MarkovGame(ABC):
    """M = {N, S, A, P, r, gamma, mu} with sum-decomposable rewards.

    Implementations keep r_i in [0, r_max / agent_count]. `step` must be a
    pure function of (state, joint_action, rng state).
    """

    env_id: str = "game"
    gamma: float = 0.99
    r_max: float = 1.0
    horizon: int = 100
    reward_shift: float = 0.0

    @property
    @abstractmethod
    def agent_count(self) -> int: ...

    @property
    @abstractmethod
    def action_counts(self) -> Tuple[int, ...]: ...

    @property
    def v_max(self) -> float:
        return self.r_max / (1.0 - self.gamma)

    @abstractmethod
    def reset(self, seed: int | np.random.Generator) -> FactoredState: ...

    @abstractmethod
    def step(self, state: FactoredState, joint_action: Sequence[int], rng: np.random.Generator) -> StepResult: ...

    @abstractmethod
    def encode(self, local_state: Hashable, mode: ObservationMode) -> EncodedState: ...

    @abstractmethod
    def featurize(self, encoded: EncodedState, full: bool) -> list[float]:
        """Fixed-width numeric slots for one member of an observation."""

    @abstractmethod
    def feature_width(self, full: bool) -> int: ...

    def legal_actions(self, state: FactoredState, agent: int) -> Tuple[int, ...]:
        return tuple(range(self.action_counts[agent]))

    def finalize_rewards(self, episode_buffer: list) -> list[Tuple[float, ...]]:
        """Per-step per-agent rewards. Instantaneous-reward games return them as is."""
        return [tuple(entry.rewards) for entry in episode_buffer]

    def makespan(self, state: FactoredState, done: bool) -> int:
        return state.clock
