# scamfqi/learning/policies.py - fitted Q functions and the policies read off them
from typing import Protocol, Sequence

import numpy as np

from scamfqi.core.errors import ArgumentError
from scamfqi.core.rng import sample_index
from scamfqi.learning.features import FeatureSchema, encode_all_actions
from scamfqi.learning.regression import Regressor
from scamfqi.models.game import MarkovGame
from scamfqi.schemas.graph import Observation


class BehaviorPolicy(Protocol):
    policy_id: str

    def sample(self, obs: Observation, rng: np.random.Generator) -> int: ...


class QApprox:
    """q_i^k over (s_{N_i}, a_i). A missing regressor stands for q = 0."""

    def __init__(
        self,
        owner: int,
        schema: FeatureSchema,
        env: MarkovGame,
        v_max: float,
        regressor: Regressor | None = None,
        clip: bool = True,
    ):
        self.owner = owner
        self.schema = schema
        self.env = env
        self.v_max = v_max
        self.regressor = regressor
        self.clip = clip
        self.train_mse: float | None = None
        self._cache: dict[tuple, np.ndarray] = {}

    @property
    def action_count(self) -> int:
        return self.schema.action_count

    def _finish(self, raw: np.ndarray) -> np.ndarray:
        return np.clip(raw, 0.0, self.v_max) if self.clip else raw

    def values(self, obs: Observation) -> np.ndarray:
        cached = self._cache.get(obs.values)
        if cached is None:
            if self.regressor is None:
                self.schema.check(obs)
                cached = np.zeros(self.action_count)
            else:
                cached = self._finish(self.regressor.predict(encode_all_actions(obs, self.schema, self.env)))
            self._cache[obs.values] = cached
        return cached

    def values_batch(self, observations: Sequence[Observation]) -> np.ndarray:
        """(n, |A_i|) values; unseen observations go through one predict call."""
        missing: dict[tuple, Observation] = {}
        for obs in observations:
            if obs.values not in self._cache and obs.values not in missing:
                missing[obs.values] = obs
        if missing:
            if self.regressor is None:
                for key, obs in missing.items():
                    self.schema.check(obs)
                    self._cache[key] = np.zeros(self.action_count)
            else:
                blocks = [encode_all_actions(obs, self.schema, self.env) for obs in missing.values()]
                preds = self._finish(self.regressor.predict(np.vstack(blocks)))
                for n, key in enumerate(missing):
                    self._cache[key] = preds[n * self.action_count:(n + 1) * self.action_count]
        if not observations:
            return np.zeros((0, self.action_count))
        return np.stack([self._cache[obs.values] for obs in observations])

    def value(self, obs: Observation, action: int) -> float:
        return float(self.values(obs)[action])

    def max_value(self, obs: Observation) -> float:
        return float(self.values(obs).max())

    def greedy_action(self, obs: Observation) -> int:
        # np.argmax returns the first maximizer: lowest action id wins ties
        return int(np.argmax(self.values(obs)))


class UniformPolicy:
    policy_id = "uniform"

    def __init__(self, action_count: int):
        if action_count < 1:
            raise ArgumentError("action_count must be >= 1")
        self.action_count = action_count
        self._probs = np.full(action_count, 1.0 / action_count)

    def probabilities(self, obs: Observation) -> np.ndarray:
        return self._probs

    def sample(self, obs: Observation, rng: np.random.Generator) -> int:
        return sample_index(self._probs, rng)


class AgentPolicy:
    """epsilon-greedy w.r.t. a QApprox."""

    def __init__(self, q: QApprox, epsilon: float):
        if not 0.0 <= epsilon <= 1.0:
            raise ArgumentError(f"epsilon must lie in [0, 1], got {epsilon}")
        self.q = q
        self.epsilon = epsilon

    @property
    def policy_id(self) -> str:
        return f"greedy(eps={self.epsilon:g})"

    @property
    def action_count(self) -> int:
        return self.q.action_count

    def with_epsilon(self, epsilon: float) -> "AgentPolicy":
        return AgentPolicy(self.q, epsilon)

    def probabilities(self, obs: Observation) -> np.ndarray:
        n = self.action_count
        probs = np.full(n, self.epsilon / n)
        probs[self.q.greedy_action(obs)] += 1.0 - self.epsilon
        return probs

    def sample(self, obs: Observation, rng: np.random.Generator) -> int:
        return sample_index(self.probabilities(obs), rng)
