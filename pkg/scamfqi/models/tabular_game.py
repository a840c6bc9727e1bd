# scamfqi/models/tabular_game.py - small explicitly enumerated Markov games
import json
import logging
from functools import cached_property
from typing import Hashable, Sequence

import numpy as np

from scamfqi.core.config import MAX_TABLE_ENTRIES, PROB_TOL
from scamfqi.core.errors import ArgumentError
from scamfqi.core.rng import sample_index
from scamfqi.models.game import FactoredState, MarkovGame, StepResult
from scamfqi.schemas.graph import EncodedState, ObservationMode
from scamfqi.schemas.tabular import DataDistributionFile, TabularGameFile

logger = logging.getLogger(__name__)


class TabularGame(MarkovGame):
    """Dense-table game. Joint indices use C-order mixed radix (agent 0 most significant)."""

    env_id = "tabular"

    def __init__(
        self,
        state_sizes: Sequence[int],
        action_sizes: Sequence[int],
        P: np.ndarray,
        rewards: np.ndarray,
        gamma: float,
        mu: np.ndarray,
        r_max: float | None = None,
        horizon: int | None = None,
    ):
        self.state_sizes = tuple(int(x) for x in state_sizes)
        self.action_sizes = tuple(int(x) for x in action_sizes)
        if len(self.state_sizes) != len(self.action_sizes):
            raise ArgumentError("state_sizes and action_sizes must have one entry per agent")
        S, A = self.n_states, self.n_actions
        if S * A > MAX_TABLE_ENTRIES:
            raise ArgumentError(f"Game too large for dense tables: |S||A| = {S * A} > {MAX_TABLE_ENTRIES}")
        self.P = np.asarray(P, dtype=float)
        self.rewards = np.asarray(rewards, dtype=float)
        self.mu = np.asarray(mu, dtype=float)
        if self.P.shape != (S, A, S):
            raise ArgumentError(f"P must have shape {(S, A, S)}, got {self.P.shape}")
        if self.rewards.shape != (len(self.state_sizes), S, A):
            raise ArgumentError(f"rewards must have shape {(len(self.state_sizes), S, A)}, got {self.rewards.shape}")
        if self.mu.shape != (S,):
            raise ArgumentError(f"mu must have shape {(S,)}, got {self.mu.shape}")
        if not 0.0 <= gamma < 1.0:
            raise ArgumentError(f"gamma must lie in [0, 1), got {gamma}")
        if np.any(self.P < 0) or np.max(np.abs(self.P.sum(axis=2) - 1.0)) > PROB_TOL:
            raise ArgumentError("every P row must be a probability vector")
        if np.any(self.mu < 0) or abs(self.mu.sum() - 1.0) > PROB_TOL:
            raise ArgumentError("mu must be a probability vector")
        if np.any(self.rewards < 0):
            raise ArgumentError("rewards must be non-negative")
        self.gamma = float(gamma)
        n = len(self.state_sizes)
        self.r_max = float(r_max) if r_max is not None else float(n * self.rewards.max(initial=0.0))
        if self.rewards.sum(axis=0).max(initial=0.0) > self.r_max + PROB_TOL:
            raise ArgumentError("sum of agent rewards exceeds r_max")
        if horizon is None:
            # long enough for discounted returns to be accurate to ~1e-6 of V_max
            horizon = 1 if self.gamma == 0 else int(np.ceil(np.log(1e-6) / np.log(self.gamma)))
        self.horizon = int(horizon)

    # -- sizes and index maps ------------------------------------------------

    @property
    def agent_count(self) -> int:
        return len(self.state_sizes)

    @property
    def action_counts(self) -> tuple[int, ...]:
        return self.action_sizes

    @property
    def n_states(self) -> int:
        return int(np.prod(self.state_sizes))

    @property
    def n_actions(self) -> int:
        return int(np.prod(self.action_sizes))

    @property
    def joint_reward(self) -> np.ndarray:
        return self.rewards.sum(axis=0)

    @cached_property
    def state_components(self) -> np.ndarray:
        """(S, N) table of per-agent local states."""
        return np.stack(np.unravel_index(np.arange(self.n_states), self.state_sizes), axis=1)

    @cached_property
    def action_components(self) -> np.ndarray:
        return np.stack(np.unravel_index(np.arange(self.n_actions), self.action_sizes), axis=1)

    def local_size(self, members: Sequence[int]) -> int:
        return int(np.prod([self.state_sizes[j] for j in members]))

    def local_index(self, members: Sequence[int]) -> np.ndarray:
        """(S,) map from joint state index to the index of s_{members}."""
        members = list(members)
        if not members:
            return np.zeros(self.n_states, dtype=int)
        dims = [self.state_sizes[j] for j in members]
        return np.ravel_multi_index(tuple(self.state_components[:, members].T), dims)

    def agent_action(self, i: int) -> np.ndarray:
        """(A,) map from joint action index to agent i's action."""
        return self.action_components[:, i]

    def state_index(self, state: FactoredState) -> int:
        return int(np.ravel_multi_index(tuple(int(c) for c in state.components), self.state_sizes))

    def action_index(self, joint_action: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(int(a) for a in joint_action), self.action_sizes))

    def state_from_index(self, s: int, clock: int = 0) -> FactoredState:
        return FactoredState(components=tuple(int(c) for c in self.state_components[s]), clock=clock)

    # -- MarkovGame ----------------------------------------------------------

    def reset(self, seed: int | np.random.Generator) -> FactoredState:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return self.state_from_index(sample_index(self.mu, rng))

    def step(self, state: FactoredState, joint_action: Sequence[int], rng: np.random.Generator) -> StepResult:
        s = self.state_index(state)
        a = self.action_index(joint_action)
        nxt = sample_index(self.P[s, a], rng)
        return StepResult(
            state=self.state_from_index(nxt, clock=state.clock + 1),
            rewards=tuple(float(r) for r in self.rewards[:, s, a]),
            done=False,
            actions=tuple(int(x) for x in joint_action),
            targets=tuple(None for _ in joint_action),
        )

    def encode(self, local_state: Hashable, mode: ObservationMode) -> EncodedState:
        if mode == ObservationMode.FULL:
            return (int(local_state),)
        return (int(int(local_state) != 0),)

    def featurize(self, encoded: EncodedState, full: bool) -> list[float]:
        return [float(encoded[0])]

    def feature_width(self, full: bool) -> int:
        return 1

    # -- io ------------------------------------------------------------------

    @classmethod
    def from_file(cls, path: str) -> "TabularGame":
        with open(path) as f:
            spec = TabularGameFile.model_validate(json.load(f))
        return cls(spec.state_sizes, spec.action_sizes, np.array(spec.P), np.array(spec.rewards),
                   spec.gamma, np.array(spec.mu), r_max=spec.r_max)

    def to_file_model(self) -> TabularGameFile:
        return TabularGameFile(
            state_sizes=list(self.state_sizes),
            action_sizes=list(self.action_sizes),
            P=self.P.tolist(),
            rewards=self.rewards.tolist(),
            gamma=self.gamma,
            mu=self.mu.tolist(),
            r_max=self.r_max,
        )


def load_distribution(path: str, game: TabularGame) -> np.ndarray:
    with open(path) as f:
        spec = DataDistributionFile.model_validate(json.load(f))
    nu = np.array(spec.nu, dtype=float)
    if nu.shape != (game.n_states, game.n_actions):
        raise ArgumentError(f"nu must have shape {(game.n_states, game.n_actions)}, got {nu.shape}")
    if np.any(nu < 0) or abs(nu.sum() - 1.0) > PROB_TOL:
        raise ArgumentError("nu must be a probability vector over S x A")
    return nu


def uniform_distribution(game: TabularGame) -> np.ndarray:
    return np.full((game.n_states, game.n_actions), 1.0 / (game.n_states * game.n_actions))


def random_game(
    rng: np.random.Generator,
    state_sizes: Sequence[int],
    action_sizes: Sequence[int],
    gamma: float = 0.9,
    reward_scale: float = 1.0,
    deterministic: bool = False,
) -> TabularGame:
    S = int(np.prod(state_sizes))
    A = int(np.prod(action_sizes))
    n = len(state_sizes)
    if deterministic:
        P = np.zeros((S, A, S))
        nxt = rng.integers(S, size=(S, A))
        P[np.arange(S)[:, None], np.arange(A)[None, :], nxt] = 1.0
    else:
        P = rng.random((S, A, S)) + 1e-3
        P /= P.sum(axis=2, keepdims=True)
    rewards = rng.random((n, S, A)) * reward_scale / n
    mu = rng.random(S) + 1e-3
    mu /= mu.sum()
    return TabularGame(state_sizes, action_sizes, P, rewards, gamma, mu, r_max=reward_scale)


def decoupled_game(
    rng: np.random.Generator,
    state_sizes: Sequence[int],
    action_sizes: Sequence[int],
    gamma: float = 0.9,
) -> TabularGame:
    """Agents evolve independently: P is a product of per-agent kernels and r_i sees only (s_i, a_i)."""
    n = len(state_sizes)
    kernels = []
    local_rewards = []
    for i in range(n):
        k = rng.random((state_sizes[i], action_sizes[i], state_sizes[i])) + 1e-3
        kernels.append(k / k.sum(axis=2, keepdims=True))
        local_rewards.append(rng.random((state_sizes[i], action_sizes[i])) / n)
    S = int(np.prod(state_sizes))
    A = int(np.prod(action_sizes))
    sc = np.stack(np.unravel_index(np.arange(S), state_sizes), axis=1)
    ac = np.stack(np.unravel_index(np.arange(A), action_sizes), axis=1)
    P = np.ones((S, A, S))
    rewards = np.zeros((n, S, A))
    for i in range(n):
        si = sc[:, i]
        ai = ac[:, i]
        P *= kernels[i][si[:, None, None], ai[None, :, None], si[None, None, :]]
        rewards[i] = local_rewards[i][si[:, None], ai[None, :]]
    P /= P.sum(axis=2, keepdims=True)
    mu = np.ones(S) / S
    return TabularGame(state_sizes, action_sizes, P, rewards, gamma, mu, r_max=1.0)
