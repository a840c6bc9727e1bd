# scamfqi/models/plant.py - multi-agent production scheduling plant
import bisect
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import networkx as nx
import numpy as np
from pydantic import ValidationError

from scamfqi.core.errors import ArgumentError, ConfigError
from scamfqi.models.game import BufferedStep, FactoredState, MarkovGame, StepResult
from scamfqi.models.sharing import neighborhood, project
from scamfqi.schemas.graph import EncodedState, Observation, ObservationMode, SharingGraph
from scamfqi.schemas.scenario import REMOVE_OP, ScenarioFile

logger = logging.getLogger(__name__)

NOOP = 0
PROCESS = 1
SEND_OFFSET = 2


@dataclass(frozen=True)
class Product:
    id: int
    remaining_ops: tuple[int, ...]

    @property
    def next_op(self) -> int:
        return self.remaining_ops[0]


@dataclass(frozen=True)
class AgentLocalState:
    buffer: tuple[Product, ...] = ()
    busy_remaining: int = 0
    capabilities: frozenset = field(default_factory=frozenset)

    @property
    def head(self) -> Product | None:
        return self.buffer[0] if self.buffer else None


def send(k: int) -> int:
    return SEND_OFFSET + k


def load_scenario(path: str) -> ScenarioFile:
    try:
        with open(path) as f:
            return ScenarioFile.model_validate(json.load(f))
    except (OSError, json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"Invalid scenario file {path}: {e}") from e


def layout_graph(scenario: ScenarioFile) -> nx.Graph:
    """Plant links: all Chebyshev-distance-1 pairs unless links are given explicitly."""
    rows, cols = scenario.layout.rows, scenario.layout.cols
    g = nx.Graph()
    g.add_nodes_from(range(rows * cols))
    if scenario.layout.links is not None:
        for link in scenario.layout.links:
            if len(link) != 2:
                raise ConfigError(f"layout link {link} must have two endpoints")
            g.add_edge(int(link[0]), int(link[1]))
    else:
        for r in range(rows):
            for c in range(cols):
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        rr, cc = r + dr, c + dc
                        if (dr or dc) and 0 <= rr < rows and 0 <= cc < cols:
                            g.add_edge(r * cols + c, rr * cols + cc)
    if g.number_of_nodes() != rows * cols:
        raise ConfigError("layout links reference agents outside the grid")
    if not nx.is_connected(g):
        raise ConfigError("plant layout must be connected")
    return g


def product_ops(spec_ops: Sequence[int]) -> tuple[int, ...]:
    ops = [op for op in spec_ops if op != REMOVE_OP]
    return tuple(ops) + (REMOVE_OP,)


def makespan_lower_bound(scenario: ScenarioFile) -> int:
    """max over products of the summed durations, ignoring routing and contention."""
    durations = {op.id: op.duration for op in scenario.operations}
    durations.setdefault(REMOVE_OP, 1)
    return max((sum(durations[op] for op in product_ops(p.ops)) for p in scenario.products), default=0)


class ProductionPlant(MarkovGame):
    """Grid of agents routing products through their operation sequences.

    Each tick every agent acts on the head of its buffer: NOOP, PROCESS the
    head's next operation, or SEND the head to its k-th neighbor (sorted by
    id). Transfers take one tick; illegal actions are coerced to NOOP.
    """

    def __init__(self, scenario: ScenarioFile, gamma: float | None = None):
        self.scenario = scenario
        self.env_id = f"plant:{scenario.name}"
        self.layout = layout_graph(scenario)
        self.n_agents = scenario.layout.rows * scenario.layout.cols
        self.neighbors = [tuple(sorted(self.layout.neighbors(i))) for i in range(self.n_agents)]
        self.durations = {op.id: op.duration for op in scenario.operations}
        self.durations.setdefault(REMOVE_OP, 1)
        self.op_ids = tuple(sorted(self.durations))
        self.gamma = scenario.gamma if gamma is None else gamma
        self.horizon = scenario.horizon
        # raw rewards live in [-horizon, 0]; shifting keeps r_i >= 0
        self.reward_shift = float(scenario.horizon)
        self.r_max = self.n_agents * self.reward_shift
        self.capabilities = self._validated_capabilities()

    def _validated_capabilities(self) -> list[frozenset]:
        s = self.scenario
        caps: list[set] = [set() for _ in range(self.n_agents)]
        for key, ops in s.capabilities.items():
            agent = int(key)
            if not 0 <= agent < self.n_agents:
                raise ConfigError(f"capability declared for unknown agent {agent}")
            unknown = set(ops) - set(self.durations)
            if unknown:
                raise ConfigError(f"agent {agent} declares undefined operations {sorted(unknown)}")
            caps[agent].update(ops)
        for agent in list(s.entries) + list(s.exits):
            if not 0 <= agent < self.n_agents:
                raise ConfigError(f"entry/exit agent {agent} outside the layout")
        if not s.entries or not s.exits:
            raise ConfigError("scenario needs at least one entry and one exit agent")
        for agent in s.exits:
            caps[agent].add(REMOVE_OP)
        performable = set().union(*caps)
        for n, product in enumerate(s.products):
            missing = [op for op in product_ops(product.ops) if op not in performable]
            if missing:
                raise ConfigError(f"product {n} needs operations {missing} that no agent can perform")
        return [frozenset(c) for c in caps]

    # -- MarkovGame ----------------------------------------------------------

    @property
    def agent_count(self) -> int:
        return self.n_agents

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(SEND_OFFSET + len(nb) for nb in self.neighbors)

    def reset(self, seed: int | np.random.Generator = 0) -> FactoredState:
        # all products arrive at t = 0, round-robin over entry agents
        buffers: list[list[Product]] = [[] for _ in range(self.n_agents)]
        for pid, spec in enumerate(self.scenario.products):
            entry = self.scenario.entries[pid % len(self.scenario.entries)]
            buffers[entry].append(Product(pid, product_ops(spec.ops)))
        comps = tuple(
            AgentLocalState(tuple(buffers[i]), 0, self.capabilities[i]) for i in range(self.n_agents)
        )
        return FactoredState(comps, clock=0)

    def legal_actions(self, state: FactoredState, agent: int) -> tuple[int, ...]:
        local: AgentLocalState = state.components[agent]
        if local.busy_remaining > 0 or not local.buffer:
            return (NOOP,)
        legal = [NOOP]
        if local.head.next_op in local.capabilities:
            legal.append(PROCESS)
        legal.extend(send(k) for k in range(len(self.neighbors[agent])))
        return tuple(legal)

    def step(self, state: FactoredState, joint_action: Sequence[int], rng: np.random.Generator | None = None) -> StepResult:
        if len(joint_action) != self.n_agents:
            raise ArgumentError(f"expected {self.n_agents} actions, got {len(joint_action)}")
        buffers = [list(c.buffer) for c in state.components]
        busy = [c.busy_remaining for c in state.components]
        incoming: list[list[Product]] = [[] for _ in range(self.n_agents)]
        effective, targets, removed = [], [], []
        coerced = 0

        def complete(i: int) -> None:
            p = buffers[i][0]
            if p.next_op == REMOVE_OP:
                buffers[i].pop(0)
                removed.append((p.id, i))
            else:
                buffers[i][0] = Product(p.id, p.remaining_ops[1:])

        for i in range(self.n_agents):
            a = int(joint_action[i])
            if a not in self.legal_actions(state, i):
                coerced += 1
                a = NOOP
            head = buffers[i][0] if buffers[i] else None
            targets.append(head.id if head else None)
            effective.append(a)
            if busy[i] > 0:
                busy[i] -= 1
                if busy[i] == 0:
                    complete(i)
            elif a == PROCESS:
                busy[i] = self.durations[head.next_op] - 1
                if busy[i] == 0:
                    complete(i)
            elif a >= SEND_OFFSET:
                incoming[self.neighbors[i][a - SEND_OFFSET]].append(buffers[i].pop(0))

        for j in range(self.n_agents):
            buffers[j].extend(incoming[j])
        comps = tuple(
            AgentLocalState(tuple(buffers[i]), busy[i], self.capabilities[i]) for i in range(self.n_agents)
        )
        done = not any(buffers)
        return StepResult(
            state=FactoredState(comps, clock=state.clock + 1),
            rewards=tuple(0.0 for _ in range(self.n_agents)),
            done=done,
            actions=tuple(effective),
            targets=tuple(targets),
            info={"coerced": coerced, "removed": removed},
        )

    # -- rewards -------------------------------------------------------------

    def finalize_raw_rewards(self, episode_buffer: list[BufferedStep]) -> list[tuple[float, ...]]:
        """-(t' - t) for the product each agent acted on at tick t.

        t' is the next tick the product is back in the acting agent's buffer
        (or at the head of any buffer with reward_reseen_by = "any"); when
        that never happens, the tick it was removed at, else the episode end.
        Acting on an empty buffer earns 0.
        """
        if not episode_buffer:
            raise ArgumentError("episode buffer is empty")
        start = episode_buffer[0].tick
        if start != 0 or any(step.tick != start + k for k, step in enumerate(episode_buffer)):
            raise ArgumentError("episode buffer is incomplete: ticks must run contiguously from 0")
        if any(len(step.result.targets) != self.n_agents for step in episode_buffer):
            raise ArgumentError("episode buffer entries must record one target per agent")

        anyone = self.scenario.reward_reseen_by == "any"
        seen: dict[tuple, list[int]] = defaultdict(list)
        removed_at: dict[int, int] = {}
        for step in episode_buffer:
            tick = step.tick + 1
            for i, local in enumerate(step.result.state.components):
                if anyone:
                    if local.buffer:
                        seen[(None, local.buffer[0].id)].append(tick)
                else:
                    for p in local.buffer:
                        seen[(i, p.id)].append(tick)
            for pid, _agent in step.result.info.get("removed", ()):
                removed_at[pid] = step.tick
        end = episode_buffer[-1].tick + 1

        rewards = []
        for step in episode_buffer:
            t = step.tick
            row = []
            for i, pid in enumerate(step.result.targets):
                if pid is None:
                    row.append(0.0)
                    continue
                ticks = seen.get((None if anyone else i, pid), [])
                k = bisect.bisect_right(ticks, t)
                t_next = ticks[k] if k < len(ticks) else removed_at.get(pid, end)
                row.append(-float(t_next - t))
            rewards.append(tuple(row))
        return rewards

    def finalize_rewards(self, episode_buffer: list[BufferedStep]) -> list[tuple[float, ...]]:
        return [tuple(r + self.reward_shift for r in row) for row in self.finalize_raw_rewards(episode_buffer)]

    # -- observations --------------------------------------------------------

    def busy_flag(self, local: AgentLocalState) -> int:
        if self.scenario.busy_means_processing_only:
            return int(local.busy_remaining > 0)
        return int(local.busy_remaining > 0 or bool(local.buffer))

    def encode(self, local_state: Hashable, mode: ObservationMode) -> EncodedState:
        local: AgentLocalState = local_state
        if mode == ObservationMode.COMPRESSED:
            return (self.busy_flag(local),)
        out = [local.busy_remaining, len(local.buffer)]
        for p in local.buffer:
            out.extend((p.id, len(p.remaining_ops), *p.remaining_ops))
        return tuple(out)

    def featurize(self, encoded: EncodedState, full: bool) -> list[float]:
        if not full:
            return [float(encoded[0])]
        busy, count = encoded[0], encoded[1]
        counts = [0.0] * len(self.op_ids)
        if count:
            n_ops = encoded[3]
            for op in encoded[4:4 + n_ops]:
                counts[self.op_ids.index(op)] += 1.0
        return [float(count), *counts, float(busy)]

    def feature_width(self, full: bool) -> int:
        return 2 + len(self.op_ids) if full else 1

    def observe(self, state: FactoredState, agent: int, graph: SharingGraph, mode: ObservationMode) -> Observation:
        return project(state, neighborhood(graph, agent), self, mode, owner=agent)

    def products_in_plant(self, state: FactoredState) -> int:
        return sum(len(c.buffer) for c in state.components)
