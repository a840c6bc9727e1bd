# scamfqi/learning/fqi.py - per-agent fitted Q-iteration over shared observations
import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from scamfqi.core.errors import ArgumentError, ScamFqiError, StageError
from scamfqi.core.rng import derive_seed
from scamfqi.learning.features import FeatureSchema, encode
from scamfqi.learning.policies import AgentPolicy, BehaviorPolicy, QApprox
from scamfqi.learning.regression import make_regressor
from scamfqi.models.game import MarkovGame
from scamfqi.schemas.dataset import AgentDataset
from scamfqi.schemas.graph import ObservationMode, SharingGraph
from scamfqi.schemas.training import IterationLog, TrainConfig
from scamfqi.services.collector import run_episode

logger = logging.getLogger(__name__)


@dataclass
class TrainResult:
    # iterations[k][i] = (q_i^k, pi_i^k); k = 0 is the untrained q = 0
    iterations: list[list[tuple[QApprox, AgentPolicy]]]
    log: list[IterationLog] = field(default_factory=list)

    def policies(self, k: int) -> list[AgentPolicy]:
        return [policy for _, policy in self.iterations[k]]


def schema_for_dataset(env: MarkovGame, dataset: AgentDataset) -> FeatureSchema:
    mode = ObservationMode(dataset.mode)
    members = tuple(dataset.members)
    widths = tuple(env.feature_width(j == dataset.owner or mode == ObservationMode.FULL) for j in members)
    return FeatureSchema(dataset.owner, members, mode, widths, env.action_counts[dataset.owner])


def _check_layout(dataset: AgentDataset, q_prev: QApprox) -> None:
    s = q_prev.schema
    if dataset.owner != s.owner or tuple(dataset.members) != s.members or ObservationMode(dataset.mode) != s.mode:
        raise ArgumentError(f"dataset of agent {dataset.owner} does not match the Q-function schema of agent {s.owner}")


def design_matrix(dataset: AgentDataset, schema: FeatureSchema, env: MarkovGame) -> np.ndarray:
    if not dataset.records:
        return np.zeros((0, schema.width))
    return np.vstack([encode(r.obs, r.action, schema, env) for r in dataset.records])


def target_values(
    dataset: AgentDataset,
    q_prev: QApprox,
    gamma: float,
    terminal_bootstrap_zero: bool = True,
    terminal_value: float = 0.0,
) -> np.ndarray:
    """y_t = r_t + gamma * max_a' q_prev(s'_t, a'), with terminal_value standing in at done."""
    _check_layout(dataset, q_prev)
    records = dataset.records
    rewards = np.array([r.reward for r in records], dtype=float)
    if gamma == 0.0 or not records:
        return rewards
    bootstrap = q_prev.values_batch([r.next_obs for r in records]).max(axis=1)
    if terminal_bootstrap_zero:
        done = np.array([r.done for r in records], dtype=bool)
        bootstrap = np.where(done, terminal_value, bootstrap)
    return rewards + gamma * bootstrap


def build_targets(
    dataset: AgentDataset,
    q_prev: QApprox,
    gamma: float,
    terminal_bootstrap_zero: bool = True,
    terminal_value: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    y = target_values(dataset, q_prev, gamma, terminal_bootstrap_zero, terminal_value)
    return design_matrix(dataset, q_prev.schema, q_prev.env), y


def zero_q(env: MarkovGame, schema: FeatureSchema, clip: bool = True) -> QApprox:
    return QApprox(schema.owner, schema, env, env.v_max, regressor=None, clip=clip)


def fit_iteration(
    dataset: AgentDataset,
    q_prev: QApprox,
    config: TrainConfig,
    iteration: int = 1,
    X: np.ndarray | None = None,
) -> QApprox:
    """q_i^k = argmin_f sum_t (f(s_t, a_t) - y_t)^2 over the regressor class."""
    if not dataset.records:
        raise ArgumentError(f"dataset of agent {dataset.owner} is empty")
    y = target_values(dataset, q_prev, config.gamma, config.terminal_bootstrap_zero, config.terminal_value)
    if X is None:
        X = design_matrix(dataset, q_prev.schema, q_prev.env)
    # same seed for every agent within an iteration: identical data gives identical fits
    params = config.trees.model_copy(update={"seed": derive_seed(config.trees.seed, iteration)})
    regressor = make_regressor(config.regressor, params)
    try:
        regressor.fit(X, y)
        mse = float(np.mean((regressor.predict(X) - y) ** 2))
    except ScamFqiError:
        raise
    except Exception as e:
        raise StageError("fit", {"agent": dataset.owner, "iteration": iteration}, str(e)) from e
    q = QApprox(dataset.owner, q_prev.schema, q_prev.env, q_prev.v_max, regressor, clip=config.clip_to_vmax)
    q.train_mse = mse
    return q


def train(
    env: MarkovGame,
    datasets: Sequence[AgentDataset],
    config: TrainConfig,
    agent_order: Sequence[int] | None = None,
) -> TrainResult:
    """K synchronized iterations; agents never see each other's data."""
    n = env.agent_count
    if len(datasets) != n or sorted(ds.owner for ds in datasets) != list(range(n)):
        raise ArgumentError(f"train needs exactly one dataset per agent (0..{n - 1})")
    by_owner = {ds.owner: ds for ds in datasets}
    order = list(agent_order) if agent_order is not None else list(range(n))
    if sorted(order) != list(range(n)):
        raise ArgumentError("agent_order must be a permutation of the agent ids")

    schemas = {i: schema_for_dataset(env, by_owner[i]) for i in range(n)}
    features = {i: design_matrix(by_owner[i], schemas[i], env) for i in range(n)}
    q_prev = {i: zero_q(env, schemas[i], config.clip_to_vmax) for i in range(n)}
    result = TrainResult(iterations=[[(q_prev[i], AgentPolicy(q_prev[i], config.epsilon_greedy)) for i in range(n)]])

    for k in range(1, config.K + 1):
        fitted = {}
        for i in order:
            start = time.perf_counter()
            fitted[i] = fit_iteration(by_owner[i], q_prev[i], config, k, features[i])
            elapsed = time.perf_counter() - start
            result.log.append(IterationLog(iteration=k, agent=i, train_mse=fitted[i].train_mse, wall_time=elapsed))
            logger.info("iteration %d agent %d: train_mse=%.6g (%.2fs)", k, i, fitted[i].train_mse, elapsed)
        result.iterations.append([(fitted[i], AgentPolicy(fitted[i], config.epsilon_greedy)) for i in range(n)])
        q_prev = fitted
    return result


def evaluate(
    env: MarkovGame,
    policies: Sequence[BehaviorPolicy],
    graph: SharingGraph,
    mode: ObservationMode,
    episodes: int,
    seed: int,
    epsilon_override: float | None = None,
    horizon: int | None = None,
) -> dict:
    """Roll out pi(a|s) = prod_i pi_i(a_i|s_{N_i}); returns are in unshifted units."""
    if len(policies) != env.agent_count:
        raise ArgumentError(f"expected {env.agent_count} policies, got {len(policies)}")
    if episodes < 1:
        raise ArgumentError("episodes must be >= 1")
    if epsilon_override is not None:
        policies = [p.with_epsilon(epsilon_override) if isinstance(p, AgentPolicy) else p for p in policies]
    horizon = horizon or env.horizon
    per_episode = []
    for e in range(episodes):
        trace = run_episode(env, graph, ObservationMode(mode), policies, seed, e, horizon)
        per_episode.append(
            {
                "episode": e,
                "makespan": trace.makespan,
                "return": trace.discounted_return(env.gamma, env.reward_shift),
                "done": trace.done,
            }
        )
    return {
        "mean_return": float(np.mean([p["return"] for p in per_episode])),
        "mean_makespan": float(np.mean([p["makespan"] for p in per_episode])),
        "per_episode": per_episode,
    }
