# scamfqi/services/collector.py - episode rollouts and offline dataset collection
import logging
from dataclasses import dataclass, field
from typing import Sequence

from joblib import Parallel, delayed

from scamfqi.core.errors import ArgumentError, ScamFqiError, StageError
from scamfqi.core.rng import ENV_CHANNEL, agent_channel, stream
from scamfqi.learning.policies import BehaviorPolicy, UniformPolicy
from scamfqi.models.game import BufferedStep, MarkovGame
from scamfqi.models.sharing import neighborhoods, project
from scamfqi.schemas.dataset import AgentDataset, DatasetMeta, TransitionRecord
from scamfqi.schemas.graph import Observation, ObservationMode, SharingGraph

logger = logging.getLogger(__name__)


@dataclass
class EpisodeTrace:
    episode: int
    buffer: list[BufferedStep]
    # finalized per-step per-agent rewards, in the env's (shifted) units
    rewards: list[tuple[float, ...]]
    # observations[t][i] for t = 0..len(buffer)
    observations: list[list[Observation]] = field(default_factory=list)
    done: bool = False
    makespan: int = 0
    coerced: int = 0

    @property
    def length(self) -> int:
        return len(self.buffer)

    def discounted_return(self, gamma: float, shift: float = 0.0) -> float:
        """sum_t gamma^t sum_i (r_i,t - shift)."""
        total, discount = 0.0, 1.0
        for row in self.rewards:
            total += discount * sum(r - shift for r in row)
            discount *= gamma
        return total


def uniform_policies(env: MarkovGame) -> list[UniformPolicy]:
    return [UniformPolicy(n) for n in env.action_counts]


def run_episode(
    env: MarkovGame,
    graph: SharingGraph,
    mode: ObservationMode,
    policies: Sequence[BehaviorPolicy],
    seed: int,
    episode: int,
    horizon: int,
) -> EpisodeTrace:
    """Roll out the factored policy once.

    The env draws from stream (seed, episode, 0), agent i from
    (seed, episode, i + 1), whatever order episodes run in.
    """
    n = env.agent_count
    if len(policies) != n:
        raise ArgumentError(f"expected {n} policies, got {len(policies)}")
    if graph.agent_count != n:
        raise ArgumentError(f"graph covers {graph.agent_count} agents, env has {n}")
    hoods = neighborhoods(graph)
    env_rng = stream(seed, episode, ENV_CHANNEL)
    agent_rngs = [stream(seed, episode, agent_channel(i)) for i in range(n)]

    def observe(state) -> list[Observation]:
        return [project(state, hoods[i], env, mode, owner=i) for i in range(n)]

    state = env.reset(env_rng)
    observations = [observe(state)]
    buffer: list[BufferedStep] = []
    coerced = 0
    done = False
    for t in range(horizon):
        joint = [policies[i].sample(observations[-1][i], agent_rngs[i]) for i in range(n)]
        try:
            result = env.step(state, joint, env_rng)
        except ScamFqiError:
            raise
        except Exception as e:
            raise StageError("step", {"env": env.env_id, "episode": episode, "step": t}, str(e)) from e
        buffer.append(BufferedStep(t, state, result))
        coerced += result.info.get("coerced", 0)
        state = result.state
        observations.append(observe(state))
        if result.done:
            done = True
            break
    rewards = env.finalize_rewards(buffer) if buffer else []
    return EpisodeTrace(
        episode=episode,
        buffer=buffer,
        rewards=rewards,
        observations=observations,
        done=done,
        makespan=env.makespan(state, done),
        coerced=coerced,
    )


def _records_for(trace: EpisodeTrace, agent: int) -> list[TransitionRecord]:
    records = []
    for t, step in enumerate(trace.buffer):
        records.append(
            TransitionRecord(
                obs=trace.observations[t][agent],
                action=step.result.actions[agent],
                reward=trace.rewards[t][agent],
                next_obs=trace.observations[t + 1][agent],
                done=step.result.done,
                episode=trace.episode,
                step=t,
            )
        )
    return records


def collect(
    env: MarkovGame,
    graph: SharingGraph,
    mode: ObservationMode,
    policy: Sequence[BehaviorPolicy] | None,
    episodes: int,
    horizon: int,
    seed: int,
    n_jobs: int = 1,
) -> list[AgentDataset]:
    """One AgentDataset per agent; stored actions are the executed (legal) ones."""
    if episodes < 1 or horizon < 1:
        raise ArgumentError("episodes and horizon must be >= 1")
    mode = ObservationMode(mode)
    policies = list(policy) if policy is not None else uniform_policies(env)
    if n_jobs == 1:
        traces = [run_episode(env, graph, mode, policies, seed, e, horizon) for e in range(episodes)]
    else:
        # results come back in episode order whatever the scheduling
        traces = Parallel(n_jobs=n_jobs)(
            delayed(run_episode)(env, graph, mode, policies, seed, e, horizon) for e in range(episodes)
        )

    steps = sum(t.length for t in traces)
    coerced = sum(t.coerced for t in traces)
    logger.info(
        "collected %d episodes (%d steps) on %s, coercion rate %.4f",
        episodes, steps, env.env_id, coerced / max(steps * env.agent_count, 1),
    )
    meta = DatasetMeta(
        seed=seed,
        episode_count=episodes,
        horizon=horizon,
        env_id=env.env_id,
        behavior_policy_id=policies[0].policy_id,
        reward_shift=env.reward_shift,
    )
    hoods = neighborhoods(graph)
    return [
        AgentDataset(
            owner=i,
            members=list(hoods[i]),
            mode=mode,
            records=[r for trace in traces for r in _records_for(trace, i)],
            meta=meta,
        )
        for i in range(env.agent_count)
    ]


def pool(*datasets: AgentDataset) -> AgentDataset:
    """Concatenate one agent's datasets from several runs."""
    if not datasets:
        raise ArgumentError("nothing to pool")
    first = datasets[0]
    for ds in datasets[1:]:
        if (ds.owner, ds.members, ds.mode) != (first.owner, first.members, first.mode):
            raise ArgumentError("pooled datasets must share owner, members and mode")
        if ds.meta.env_id != first.meta.env_id or ds.meta.reward_shift != first.meta.reward_shift:
            raise ArgumentError("pooled datasets must come from the same environment")
    meta = first.meta.model_copy(
        update={
            "episode_count": sum(ds.meta.episode_count for ds in datasets),
            "behavior_policy_id": "+".join(dict.fromkeys(ds.meta.behavior_policy_id for ds in datasets)),
        }
    )
    return AgentDataset(
        owner=first.owner,
        members=first.members,
        mode=first.mode,
        records=[r for ds in datasets for r in ds.records],
        meta=meta,
    )
