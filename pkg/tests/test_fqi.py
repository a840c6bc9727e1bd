import numpy as np
import pytest

from scamfqi.core.errors import ArgumentError
from scamfqi.core.rng import stream
from scamfqi.learning.features import FeatureSchema
from scamfqi.learning.fqi import build_targets, evaluate, fit_iteration, schema_for_dataset, train, zero_q
from scamfqi.learning.policies import AgentPolicy, QApprox, UniformPolicy
from scamfqi.learning.regression import TabularMeanRegressor
from scamfqi.models.sharing import complete_graph, neighborhoods, project, self_loop_graph
from scamfqi.models.tabular_game import TabularGame, random_game
from scamfqi.oracle import bellman
from scamfqi.oracle.bellman import exact_q_star
from scamfqi.oracle.local_models import conditional_mean, population_fqi
from scamfqi.schemas.dataset import AgentDataset, DatasetMeta, TransitionRecord
from scamfqi.schemas.graph import ObservationMode
from scamfqi.schemas.training import ExtraTreesParams, TrainConfig
from scamfqi.services.collector import collect


class ActionWeights:
    """Stub regressor: value depends on the action one-hot only."""

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float)

    def predict(self, X):
        X = np.atleast_2d(X)
        return X[:, -len(self.weights):] @ self.weights


class Constant:
    def __init__(self, c):
        self.c = c

    def predict(self, X):
        return np.full(len(np.atleast_2d(X)), float(self.c))


def _obs(game, s, members, owner):
    return project(game.state_from_index(s), members, game, ObservationMode.FULL, owner=owner)


def _exhaustive_datasets(game: TabularGame, graph, copies: int = 1) -> list[AgentDataset]:
    """Every (s, a) pair `copies` times; next states follow P exactly when P is a multiple of 1/copies."""
    hoods = neighborhoods(graph)
    meta = DatasetMeta(seed=0, episode_count=1, horizon=1, env_id=game.env_id)
    records = [[] for _ in hoods]
    step = 0
    for s in range(game.n_states):
        for a in range(game.n_actions):
            counts = np.rint(game.P[s, a] * copies).astype(int)
            nexts = np.repeat(np.arange(game.n_states), counts)
            joint = game.action_components[a]
            for s2 in nexts:
                for i, members in enumerate(hoods):
                    records[i].append(
                        TransitionRecord(
                            obs=_obs(game, s, members, i),
                            action=int(joint[i]),
                            reward=float(game.rewards[i, s, a]),
                            next_obs=_obs(game, int(s2), members, i),
                            done=False,
                            episode=0,
                            step=step,
                        )
                    )
                step += 1
    return [
        AgentDataset(owner=i, members=list(m), mode=ObservationMode.FULL, records=records[i], meta=meta)
        for i, m in enumerate(hoods)
    ]


def _assert_matches_population(game, graph, result, K):
    hoods = neighborhoods(graph)
    nu = np.full((game.n_states, game.n_actions), 1.0 / (game.n_states * game.n_actions))
    oracle = population_fqi(game, nu, hoods, K)
    for k in range(1, K + 1):
        for i, members in enumerate(hoods):
            q, _ = result.iterations[k][i]
            u = game.local_index(members)
            for s in range(game.n_states):
                assert q.values(_obs(game, s, members, i)) == pytest.approx(oracle.q_tables[k][i][u[s]], abs=1e-9)


def _tabular_config(game, K) -> TrainConfig:
    return TrainConfig(K=K, gamma=game.gamma, regressor="tabular", epsilon_greedy=0.0)


# ========== Targets ==========

@pytest.fixture
def single_game():
    return random_game(np.random.default_rng(21), (2,), (2,), gamma=0.5)


def _records_dataset(game, done_flags):
    meta = DatasetMeta(seed=0, episode_count=1, horizon=len(done_flags), env_id=game.env_id)
    records = [
        TransitionRecord(obs=_obs(game, 0, (0,), 0), action=t % 2, reward=0.25 * t, next_obs=_obs(game, 1, (0,), 0),
                         done=d, episode=0, step=t)
        for t, d in enumerate(done_flags)
    ]
    return AgentDataset(owner=0, members=[0], mode=ObservationMode.FULL, records=records, meta=meta)


def test_targets_of_the_zero_function_are_the_rewards(single_game):
    ds = _records_dataset(single_game, [False, False, True])
    schema = schema_for_dataset(single_game, ds)
    X, y = build_targets(ds, zero_q(single_game, schema), single_game.gamma)
    assert y.tolist() == [0.0, 0.25, 0.5]
    assert X.shape == (3, schema.width)
    assert X[:, -2:].tolist() == [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]


def test_targets_bootstrap_except_at_done(single_game):
    ds = _records_dataset(single_game, [False, True])
    schema = schema_for_dataset(single_game, ds)
    q = QApprox(0, schema, single_game, single_game.v_max, Constant(1.0))
    _, y = build_targets(ds, q, 0.5)
    assert y.tolist() == [0.5, 0.25]
    _, y = build_targets(ds, q, 0.5, terminal_bootstrap_zero=False)
    assert y.tolist() == [0.5, 0.75]
    _, y = build_targets(ds, q, 0.5, terminal_value=3.0)
    assert y.tolist() == [0.5, 1.75]


def test_targets_reject_a_foreign_schema(single_game):
    ds = _records_dataset(single_game, [False])
    other = FeatureSchema.for_agent(single_game, complete_graph(1), 0, ObservationMode.COMPRESSED)
    with pytest.raises(ArgumentError):
        build_targets(ds, zero_q(single_game, other), 0.5)


def test_fitting_an_empty_dataset_fails(single_game):
    ds = _records_dataset(single_game, [])
    with pytest.raises(ArgumentError):
        fit_iteration(ds, zero_q(single_game, schema_for_dataset(single_game, ds)), _tabular_config(single_game, 1))


# ========== Agreement with exact population iteration ==========

@pytest.mark.parametrize("graph", [self_loop_graph(2), complete_graph(2)])
def test_exhaustive_deterministic_data_reproduces_population_iteration(graph):
    game = random_game(np.random.default_rng(31), (2, 2), (2, 2), gamma=0.8, deterministic=True)
    datasets = _exhaustive_datasets(game, graph)
    result = train(game, datasets, _tabular_config(game, 6))
    _assert_matches_population(game, graph, result, 6)


def test_replicated_records_reproduce_a_stochastic_kernel():
    rng = np.random.default_rng(32)
    game = random_game(rng, (2, 2), (2, 2), gamma=0.7)
    # rational kernel: every row a multiple of 1/4
    counts = rng.multinomial(4, np.full(game.n_states, 1.0 / game.n_states), size=(game.n_states, game.n_actions))
    game = TabularGame(game.state_sizes, game.action_sizes, counts / 4.0, game.rewards, game.gamma, game.mu, r_max=game.r_max)
    graph = self_loop_graph(2)
    result = train(game, _exhaustive_datasets(game, graph, copies=4), _tabular_config(game, 4))
    _assert_matches_population(game, graph, result, 4)


def test_one_iteration_is_the_mean_reward():
    game = random_game(np.random.default_rng(33), (2, 2), (2, 2), gamma=0.9)
    graph = self_loop_graph(2)
    result = train(game, _exhaustive_datasets(game, graph), _tabular_config(game, 1))
    assert len(result.iterations) == 2
    nu = np.full((game.n_states, game.n_actions), 1.0 / (game.n_states * game.n_actions))
    for i in range(2):
        table = conditional_mean(game, nu, (i,), i, game.rewards[i])
        q, _ = result.iterations[1][i]
        for s in range(game.n_states):
            u = game.local_index((i,))[s]
            assert q.values(_obs(game, s, (i,), i)) == pytest.approx(table[u], abs=1e-12)


def test_single_action_agents():
    game = random_game(np.random.default_rng(34), (2, 2), (1, 1), gamma=0.5)
    graph = complete_graph(2)
    result = train(game, _exhaustive_datasets(game, graph), _tabular_config(game, 3))
    q, policy = result.iterations[3][0]
    obs = _obs(game, 3, (0, 1), 0)
    assert q.values(obs).shape == (1,)
    assert policy.sample(obs, np.random.default_rng(0)) == 0


# ========== Extra-Trees training ==========

def _tree_config(game, K=2) -> TrainConfig:
    return TrainConfig(K=K, gamma=game.gamma, trees=ExtraTreesParams(n_trees=5, n_jobs=1, seed=4))


def test_agent_order_does_not_matter():
    game = random_game(np.random.default_rng(35), (2, 3), (2, 2), gamma=0.8)
    graph = complete_graph(2)
    datasets = collect(game, graph, ObservationMode.FULL, None, episodes=10, horizon=10, seed=1)
    a = train(game, datasets, _tree_config(game), agent_order=[0, 1])
    b = train(game, datasets, _tree_config(game), agent_order=[1, 0])
    for i in range(2):
        batch = [r.obs for r in datasets[i].records[:20]]
        assert np.array_equal(a.iterations[2][i][0].values_batch(batch), b.iterations[2][i][0].values_batch(batch))
    assert [(e.iteration, e.agent) for e in a.log] == [(1, 0), (1, 1), (2, 0), (2, 1)]


def test_identical_data_gives_identical_fits():
    game = random_game(np.random.default_rng(36), (3,), (2,), gamma=0.6)
    (ds,) = collect(game, self_loop_graph(1), ObservationMode.FULL, None, episodes=5, horizon=8, seed=2)
    q0 = zero_q(game, schema_for_dataset(game, ds))
    a = fit_iteration(ds, q0, _tree_config(game), iteration=3)
    b = fit_iteration(ds, q0, _tree_config(game), iteration=3)
    batch = [r.obs for r in ds.records]
    assert np.array_equal(a.values_batch(batch), b.values_batch(batch))
    assert a.train_mse == b.train_mse


def test_train_needs_one_dataset_per_agent():
    game = random_game(np.random.default_rng(37), (2, 2), (2, 2))
    datasets = collect(game, self_loop_graph(2), ObservationMode.FULL, None, 1, 3, 0)
    with pytest.raises(ArgumentError):
        train(game, datasets[:1], _tree_config(game))
    with pytest.raises(ArgumentError):
        train(game, datasets, _tree_config(game), agent_order=[0, 0])


# ========== Greedy policies ==========

@pytest.fixture
def pair_schema(pair_env):
    return FeatureSchema.for_agent(pair_env, self_loop_graph(2), 0, ObservationMode.FULL)


def _pair_obs(pair_env):
    return pair_env.observe(pair_env.reset(0), 0, self_loop_graph(2), ObservationMode.FULL)


def test_greedy_breaks_ties_towards_the_lowest_action(pair_env, pair_schema):
    obs = _pair_obs(pair_env)
    assert QApprox(0, pair_schema, pair_env, pair_env.v_max, ActionWeights([1, 3, 3])).greedy_action(obs) == 1
    assert QApprox(0, pair_schema, pair_env, pair_env.v_max, ActionWeights([10, 30, 30])).greedy_action(obs) == 1
    assert QApprox(0, pair_schema, pair_env, pair_env.v_max, ActionWeights([2, 2, 2])).greedy_action(obs) == 0


def test_values_are_clipped_to_the_value_range(pair_env, pair_schema):
    obs = _pair_obs(pair_env)
    weights = [-1.0, 5.0, pair_env.v_max + 10.0]
    clipped = QApprox(0, pair_schema, pair_env, pair_env.v_max, ActionWeights(weights))
    raw = QApprox(0, pair_schema, pair_env, pair_env.v_max, ActionWeights(weights), clip=False)
    assert clipped.values(obs).tolist() == [0.0, 5.0, pair_env.v_max]
    assert raw.values(obs).tolist() == weights
    assert clipped.values_batch([obs, obs]).shape == (2, 3)


def test_epsilon_greedy_probabilities(pair_env, pair_schema):
    q = QApprox(0, pair_schema, pair_env, pair_env.v_max, ActionWeights([0, 1, 0]))
    obs = _pair_obs(pair_env)
    assert AgentPolicy(q, 0.3).probabilities(obs) == pytest.approx([0.1, 0.8, 0.1])
    assert AgentPolicy(q, 0.0).probabilities(obs).tolist() == [0.0, 1.0, 0.0]
    with pytest.raises(ArgumentError):
        AgentPolicy(q, 1.5)


def test_full_exploration_draws_exactly_like_uniform(pair_env, pair_schema):
    q = QApprox(0, pair_schema, pair_env, pair_env.v_max, ActionWeights([0, 1, 0]))
    obs = _pair_obs(pair_env)
    explore, uniform = AgentPolicy(q, 1.0), UniformPolicy(3)
    r1, r2 = stream(0, 0, 1), stream(0, 0, 1)
    assert [explore.sample(obs, r1) for _ in range(200)] == [uniform.sample(obs, r2) for _ in range(200)]


def test_greedy_evaluation_on_a_deterministic_plant_has_no_spread(pair_env, pair_schema):
    graph = self_loop_graph(2)
    q0 = QApprox(0, pair_schema, pair_env, pair_env.v_max, ActionWeights([0, 1, 0]))
    q1 = QApprox(1, FeatureSchema.for_agent(pair_env, graph, 1, ObservationMode.FULL), pair_env, pair_env.v_max)
    policies = [AgentPolicy(q0, 0.5), AgentPolicy(q1, 0.5)]
    out = evaluate(pair_env, policies, graph, ObservationMode.FULL, episodes=5, seed=3, epsilon_override=0.0)
    assert [p["makespan"] for p in out["per_episode"]] == [1] * 5
    assert all(p["done"] for p in out["per_episode"])
    assert out["mean_return"] == 0.0


def test_optimal_q_evaluates_to_the_optimal_value():
    game = random_game(np.random.default_rng(38), (3,), (2,), gamma=0.5)
    q_star = exact_q_star(game, 1e-12).values
    v_star = float(game.mu @ q_star.max(axis=1))

    graph = self_loop_graph(1)
    schema = FeatureSchema.for_agent(game, graph, 0, ObservationMode.FULL)
    X = np.array([[s, *np.eye(2)[a]] for s in range(3) for a in range(2)], dtype=float)
    regressor = TabularMeanRegressor().fit(X, q_star.ravel())
    policy = AgentPolicy(QApprox(0, schema, game, game.v_max, regressor), 0.0)

    out = evaluate(game, [policy], graph, ObservationMode.FULL, episodes=1000, seed=4)
    returns = np.array([p["return"] for p in out["per_episode"]])
    sigma = returns.std(ddof=1) / np.sqrt(len(returns))
    # truncation at the horizon costs at most gamma^H * V_max
    slack = game.gamma ** game.horizon * game.v_max
    assert abs(out["mean_return"] - v_star) <= 3 * sigma + slack


def test_single_agent_fqi_is_value_iteration():
    game = random_game(np.random.default_rng(39), (6,), (3,), gamma=0.9, deterministic=True)
    graph = complete_graph(1)
    K = int(np.ceil(np.log(1e-3 * (1 - game.gamma) / game.v_max) / np.log(game.gamma)))
    result = train(game, _exhaustive_datasets(game, graph), _tabular_config(game, K))

    f = bellman.zero_q(game)
    for k in range(1, K + 1):
        f = bellman.centralized_bellman(f, game)
        q, _ = result.iterations[k][0]
        for s in range(game.n_states):
            assert q.values(_obs(game, s, (0,), 0)) == pytest.approx(f.values[s], abs=1e-9)

    q_star = exact_q_star(game, 1e-12).values
    q_last, _ = result.iterations[K][0]
    table = np.stack([q_last.values(_obs(game, s, (0,), 0)) for s in range(game.n_states)])
    assert np.abs(table - q_star).max() <= 1e-3
