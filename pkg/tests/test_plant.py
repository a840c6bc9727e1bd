import os

import pytest

from scamfqi.core.errors import ArgumentError, ConfigError
from scamfqi.models.game import BufferedStep
from scamfqi.models.plant import (
    NOOP,
    PROCESS,
    ProductionPlant,
    load_scenario,
    makespan_lower_bound,
    send,
)
from scamfqi.models.sharing import distance_graph, self_loop_graph
from scamfqi.schemas.graph import ObservationMode
from scamfqi.services.collector import run_episode, uniform_policies
from tests.conftest import SCENARIOS, make_scenario


def rollout(env, joint_actions):
    state = env.reset(0)
    buffer = []
    for t, joint in enumerate(joint_actions):
        result = env.step(state, joint)
        buffer.append(BufferedStep(t, state, result))
        state = result.state
    return buffer


def where(state):
    """product id -> agent holding it."""
    return {p.id: i for i, local in enumerate(state.components) for p in local.buffer}


# agent 0 sends at t=3, agent 1 returns it at t=6, agent 0 removes it at t=7
BOUNCE = [(NOOP, NOOP)] * 3 + [(send(0), NOOP), (NOOP, NOOP), (NOOP, NOOP), (NOOP, send(0)), (PROCESS, NOOP)]


# ========== Scenarios ==========

def test_reset_places_products_round_robin_over_entries():
    env = ProductionPlant(load_scenario(os.path.join(SCENARIOS, "scenario_a.json")))
    state = env.reset(0)
    assert where(state) == {0: 0, 1: 10, 2: 0}
    assert [p.id for p in state.components[0].buffer] == [0, 2]
    assert state.clock == 0
    assert env.products_in_plant(state) == 3


def test_single_agent_plant_starts_with_the_product_in_its_buffer():
    env = ProductionPlant(make_scenario(layout={"rows": 1, "cols": 1}))
    state = env.reset(0)
    assert where(state) == {0: 0}
    assert env.action_counts == (2,)


def test_desk_layout_and_actions(desk_env):
    assert desk_env.neighbors[0] == (1, 3, 4)
    assert desk_env.action_counts[0] == 5
    assert desk_env.op_ids == (0, 1, 2)
    assert desk_env.feature_width(True) == 5
    assert desk_env.r_max == 6 * 150


@pytest.mark.parametrize(
    "overrides",
    [
        {"products": [{"ops": [7]}]},
        {"operations": [{"id": 0}, {"id": 1}], "products": [{"ops": [1]}]},
        {"capabilities": {"5": [0]}},
        {"capabilities": {"1": [9]}},
        {"entries": []},
        {"exits": [4]},
        {"layout": {"rows": 1, "cols": 3, "links": [[0, 1]]}},
    ],
)
def test_invalid_scenarios_are_config_errors(overrides):
    with pytest.raises(ConfigError):
        ProductionPlant(make_scenario(**overrides))


def test_unreadable_scenario_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"name": ')
    with pytest.raises(ConfigError):
        load_scenario(str(path))


@pytest.mark.parametrize("name, bound", [("scenario_a.json", 7), ("scenario_b.json", 7), ("desk.json", 3)])
def test_makespan_lower_bounds(name, bound):
    assert makespan_lower_bound(load_scenario(os.path.join(SCENARIOS, name))) == bound


# ========== Dynamics ==========

def test_processing_keeps_the_agent_busy_for_the_duration():
    env = ProductionPlant(make_scenario(
        operations=[{"id": 0}, {"id": 1, "duration": 3}],
        capabilities={"0": [1]},
        products=[{"ops": [1]}],
    ))
    state = env.reset(0)
    state = env.step(state, (PROCESS, NOOP)).state
    assert state.components[0].busy_remaining == 2
    assert env.legal_actions(state, 0) == (NOOP,)
    state = env.step(state, (NOOP, NOOP)).state
    result = env.step(state, (NOOP, NOOP))
    head = result.state.components[0].head
    assert result.state.components[0].busy_remaining == 0
    assert head.remaining_ops == (0,)
    result = env.step(result.state, (PROCESS, NOOP))
    assert result.done and result.state.clock == 4
    assert result.info["removed"] == [(0, 0)]


def test_illegal_actions_become_noops(pair_env):
    state = pair_env.reset(0)
    result = pair_env.step(state, (send(0), PROCESS))
    assert result.actions == (send(0), NOOP)
    assert result.info["coerced"] == 1
    result = pair_env.step(state, (send(5), NOOP))
    assert result.actions == (NOOP, NOOP)
    with pytest.raises(ArgumentError):
        pair_env.step(state, (NOOP,))


def test_simultaneous_sends_swap_products():
    env = ProductionPlant(make_scenario(products=[{"ops": []}, {"ops": []}, {"ops": []}], entries=[0, 1]))
    state = env.reset(0)
    assert where(state) == {0: 0, 1: 1, 2: 0}
    state = env.step(state, (send(0), send(0))).state
    # transfers land at the tail of the receiving buffer
    assert [p.id for p in state.components[0].buffer] == [2, 1]
    assert [p.id for p in state.components[1].buffer] == [0]


def test_step_does_not_mutate_its_input(pair_env):
    state = pair_env.reset(0)
    before = where(state)
    pair_env.step(state, (send(0), NOOP))
    assert where(state) == before and state.clock == 0


# ========== Rewards ==========

def test_bounce_rewards(pair_env):
    rewards = pair_env.finalize_raw_rewards(rollout(pair_env, BOUNCE))
    assert [row[0] for row in rewards] == [-1.0, -1.0, -1.0, -4.0, 0.0, 0.0, 0.0, 0.0]
    assert [row[1] for row in rewards] == [0.0, 0.0, 0.0, 0.0, -1.0, -1.0, -1.0, 0.0]


def test_rewards_until_removal_elsewhere():
    env = ProductionPlant(make_scenario(exits=[1]))
    actions = [(NOOP, NOOP)] * 5 + [(send(0), NOOP)] + [(NOOP, NOOP)] * 14 + [(NOOP, PROCESS)]
    buffer = rollout(env, actions)
    assert buffer[-1].result.done
    rewards = env.finalize_raw_rewards(buffer)
    assert rewards[5][0] == -15.0
    assert rewards[20][1] == 0.0
    assert all(rewards[t][1] == -1.0 for t in range(6, 20))


def test_unfinished_products_are_charged_until_the_episode_end(pair_env):
    rewards = pair_env.finalize_raw_rewards(rollout(pair_env, [(send(0), NOOP), (NOOP, NOOP), (NOOP, NOOP)]))
    assert rewards[0] == (-3.0, 0.0)


def test_any_agent_seeing_the_product_counts_when_configured():
    env = ProductionPlant(make_scenario(reward_reseen_by="any"))
    rewards = env.finalize_raw_rewards(rollout(env, BOUNCE))
    assert rewards[3][0] == -1.0
    assert rewards[6][1] == -1.0


def test_shifted_rewards_are_non_negative(pair_env):
    buffer = rollout(pair_env, BOUNCE)
    raw = pair_env.finalize_raw_rewards(buffer)
    shifted = pair_env.finalize_rewards(buffer)
    assert shifted[3] == (raw[3][0] + 50.0, raw[3][1] + 50.0)
    assert min(min(row) for row in shifted) >= 0.0


def test_reward_finalization_needs_a_complete_buffer(pair_env):
    buffer = rollout(pair_env, BOUNCE)
    with pytest.raises(ArgumentError):
        pair_env.finalize_raw_rewards([])
    with pytest.raises(ArgumentError):
        pair_env.finalize_raw_rewards(buffer[1:])
    with pytest.raises(ArgumentError):
        pair_env.finalize_raw_rewards(buffer[:2] + buffer[3:])


def test_random_rollouts_respect_plant_invariants(desk_env):
    graph = self_loop_graph(desk_env.agent_count)
    policies = uniform_policies(desk_env)
    for episode in range(5):
        trace = run_episode(desk_env, graph, ObservationMode.FULL, policies, seed=7, episode=episode, horizon=150)
        removed = 0
        for step in trace.buffer:
            removed += len(step.result.info["removed"])
            before, after = where(step.state), where(step.result.state)
            assert len(after) + removed == 2
            for pid, agent in after.items():
                assert agent == before[pid] or desk_env.layout.has_edge(before[pid], agent)
        raw = desk_env.finalize_raw_rewards(trace.buffer)
        assert all(-trace.length <= r <= 0.0 for row in raw for r in row)
        if trace.done:
            assert trace.makespan >= makespan_lower_bound(desk_env.scenario)


def test_rollouts_are_deterministic(desk_env):
    graph = distance_graph(desk_env.layout, 2)
    policies = uniform_policies(desk_env)
    a = run_episode(desk_env, graph, ObservationMode.COMPRESSED, policies, seed=1, episode=3, horizon=40)
    b = run_episode(desk_env, graph, ObservationMode.COMPRESSED, policies, seed=1, episode=3, horizon=40)
    assert [s.result.state for s in a.buffer] == [s.result.state for s in b.buffer]
    assert a.rewards == b.rewards and a.observations == b.observations


# ========== Observations ==========

def test_compressed_flag_follows_the_busy_setting(desk_env):
    state = desk_env.reset(0)
    assert desk_env.encode(state.components[0], ObservationMode.COMPRESSED) == (1,)
    assert desk_env.encode(state.components[1], ObservationMode.COMPRESSED) == (0,)
    strict = ProductionPlant(load_scenario(os.path.join(SCENARIOS, "desk.json")).model_copy(
        update={"busy_means_processing_only": True}))
    assert strict.encode(state.components[0], ObservationMode.COMPRESSED) == (0,)


def test_full_encoding_lists_the_buffer(desk_env):
    state = desk_env.reset(0)
    assert desk_env.encode(state.components[0], ObservationMode.FULL) == (0, 2, 0, 2, 1, 0, 1, 2, 2, 0)
    assert desk_env.featurize(desk_env.encode(state.components[0], ObservationMode.FULL), True) == [2.0, 1.0, 1.0, 0.0, 0.0]
    obs = desk_env.observe(state, 0, distance_graph(desk_env.layout, 2), ObservationMode.COMPRESSED)
    assert obs.members == (0, 1, 3, 4)
    assert obs.values[1:] == ((0,), (0,), (0,))


def test_product_counts_as_seen_anywhere_in_the_senders_buffer():
    env = ProductionPlant(make_scenario(products=[{"ops": []}, {"ops": []}]))
    # product 0 comes back behind product 1, which never leaves agent 0
    rewards = env.finalize_raw_rewards(rollout(env, [(send(0), NOOP), (NOOP, send(0)), (NOOP, NOOP)]))
    assert rewards[0][0] == -2.0
    assert rewards[1][1] == -2.0
