import math

import numpy as np
import pytest

from scamfqi.core.errors import ArgumentError
from scamfqi.models.tabular_game import TabularGame, decoupled_game, random_game, uniform_distribution
from scamfqi.oracle.bounds import generalization_bound, propagation_bound, oracle_report, convergence_bound
from scamfqi.oracle.information import cmi, neighborhood_cmi, target_joint
from scamfqi.schemas.reports import BoundInputs
from tests.conftest import CONFIGS


def _random_joint(rng, shape):
    p = rng.random(shape) ** 3
    return p / p.sum()


def test_cmi_is_non_negative():
    rng = np.random.default_rng(0)
    for _ in range(100):
        joint = _random_joint(rng, (3, 2, 2, 3))
        for members in ([], [0], [1, 2], [0, 1, 2]):
            assert cmi(joint, members) >= 0.0


def test_cmi_vanishes_under_conditional_independence():
    rng = np.random.default_rng(1)
    p_u = _random_joint(rng, (3,))
    p_y_u = rng.random((3, 4))
    p_y_u /= p_y_u.sum(axis=1, keepdims=True)
    p_v_u = rng.random((3, 2))
    p_v_u /= p_v_u.sum(axis=1, keepdims=True)
    # axes (Y, U, V) with Y independent of V given U
    joint = np.einsum("u,uy,uv->yuv", p_u, p_y_u, p_v_u)
    assert cmi(joint, [0]) == pytest.approx(0.0, abs=1e-10)


def test_cmi_shrinks_over_nested_member_sets():
    rng = np.random.default_rng(2)
    for _ in range(100):
        joint = _random_joint(rng, (2, 2, 3, 2))
        chain = [cmi(joint, m) for m in ([], [0], [0, 1], [0, 1, 2])]
        for bigger, smaller in zip(chain, chain[1:]):
            assert smaller <= bigger + 1e-9
        assert chain[-1] == 0.0


def test_cmi_with_no_members_is_mutual_information():
    joint = np.array([[0.5, 0.0], [0.0, 0.5]])
    assert cmi(joint, []) == pytest.approx(math.log(2))


def test_cmi_of_an_identity_channel_is_the_entropy():
    p_u = np.array([0.3, 0.7])
    p_v = np.array([0.2, 0.5, 0.3])
    # axes (Y, u, v) with Y = v and u independent of v
    joint = np.einsum("u,v,yv->yuv", p_u, p_v, np.eye(3))
    assert cmi(joint, [0]) == pytest.approx(-np.sum(p_v * np.log(p_v)), abs=1e-12)


def test_cmi_matches_a_direct_triple_sum():
    rng = np.random.default_rng(4)
    for _ in range(20):
        joint = _random_joint(rng, (3, 2, 4))
        p_yu = joint.sum(axis=2)
        p_uv = joint.sum(axis=0)
        p_u = joint.sum(axis=(0, 2))
        expected = 0.0
        for y in range(3):
            for u in range(2):
                for v in range(4):
                    p = joint[y, u, v]
                    if p > 0:
                        expected += p * math.log(p * p_u[u] / (p_yu[y, u] * p_uv[u, v]))
        assert cmi(joint, [0]) == pytest.approx(expected, abs=1e-10)


def test_cmi_rejects_bad_tables():
    with pytest.raises(ArgumentError):
        cmi(np.array([0.5, 0.5]), [])
    with pytest.raises(ArgumentError):
        cmi(np.full((2, 2), 0.5), [])
    with pytest.raises(ArgumentError):
        cmi(np.full((2, 2), 0.25), [3])


def test_neighborhood_cmi_of_a_full_neighborhood_is_zero():
    rng = np.random.default_rng(3)
    game = random_game(rng, (2, 2), (2, 2))
    nu = uniform_distribution(game)
    # depends on the states and agent 0's own action only
    table = rng.random((game.n_states, 2))
    target = table[:, game.agent_action(0)]
    joint = target_joint(game, nu, target, owner=0)
    assert joint.shape[1:] == (2, 2, 2)
    assert joint.sum() == pytest.approx(1.0)
    assert neighborhood_cmi(game, nu, target, 0, (0, 1)) == pytest.approx(0.0, abs=1e-12)
    assert neighborhood_cmi(game, nu, target, 0, (0,)) >= 0.0


def _reference_bound(x: dict) -> float:
    g, K, C, V = x["gamma"], x["K"], x["C"], x["V_max"]
    first = 2 * g ** (K - 1) / (1 - g) * (g * V + math.sqrt(C) * x["eps_r"] + math.sqrt(C) * g / (1 - g) * x["eps_P"])
    factor = 2 * x["N"] / (1 - g) ** 2
    second = factor * math.sqrt(22 * C * V ** 2 * math.log(x["function_class_size"] * K * x["N"] / x["delta"]) / x["dataset_size"])
    third = factor * math.sqrt(20 * x["eps_inh"])
    return first + second + third


def _random_inputs(rng) -> dict:
    return {
        "eps_r": float(rng.uniform(0, 2)),
        "eps_P": float(rng.uniform(0, 2)),
        "eps_inh": float(rng.uniform(0, 1)),
        "C": float(rng.uniform(1, 50)),
        "V_max": float(rng.uniform(1, 100)),
        "K": int(rng.integers(1, 50)),
        "N": int(rng.integers(1, 20)),
        "gamma": float(rng.uniform(0.05, 0.99)),
        "delta": float(rng.uniform(0.01, 0.5)),
        "dataset_size": float(rng.integers(10, 10 ** 6)),
        "function_class_size": float(rng.integers(1, 10 ** 4)),
    }


def test_convergence_bound_matches_reference_formula():
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = _random_inputs(rng)
        report = convergence_bound(BoundInputs(**x))
        assert report.bound_value == pytest.approx(_reference_bound(x), rel=1e-12)
        assert report.bound_value == pytest.approx(report.bias_term + report.sampling_term + report.inherent_term, rel=1e-12)


def test_convergence_bound_monotonicity():
    base = {"eps_r": 0.3, "eps_P": 0.2, "eps_inh": 0.01, "C": 4.0, "V_max": 10.0, "K": 5, "N": 3,
            "gamma": 0.9, "delta": 0.05, "dataset_size": 1e4, "function_class_size": 100.0}

    def bound(**kw):
        return convergence_bound(BoundInputs(**{**base, **kw})).bound_value

    # ln K in the sampling term grows with K, so the K sweep uses unbounded data
    ks = [bound(K=k, dataset_size=None) for k in (1, 2, 5, 10, 40)]
    assert all(b > a for a, b in zip(ks[1:], ks))
    sizes = [bound(dataset_size=d) for d in (1e2, 1e3, 1e4, 1e6)]
    assert all(b > a for a, b in zip(sizes[1:], sizes))
    for key in ("eps_r", "eps_P", "eps_inh"):
        values = [bound(**{key: v}) for v in (0.0, 0.1, 0.5, 1.0)]
        assert all(a < b for a, b in zip(values, values[1:]))


def test_convergence_bound_rejects_bad_inputs():
    with pytest.raises(ArgumentError):
        convergence_bound(BoundInputs(V_max=1.0, K=1, N=1, gamma=1.0))
    with pytest.raises(ArgumentError):
        convergence_bound(BoundInputs(V_max=1.0, K=1, N=1, gamma=0.5, delta=1.5))


def test_propagation_and_generalization_bounds():
    assert propagation_bound(0.5, 1, 2.0, 1.0, 0.0, 0.0, 1, 0.0) == pytest.approx(2.0 / 0.5 * 0.5 * 2.0)
    direct = 22 * 4.0 * math.log(10 * 2 * 3 / 0.1) / 100 + 20 * 0.5
    assert generalization_bound(2.0, 10, 2, 3, 0.1, 100, 0.5) == pytest.approx(direct)


def test_oracle_report_on_decoupled_game():
    rng = np.random.default_rng(5)
    game = decoupled_game(rng, (2, 2), (2, 2), gamma=0.8)
    report = oracle_report(game, uniform_distribution(game), [(0,), (1,)], iterations=30, dataset_size=None)
    assert report.eps_r <= 1e-12 and report.eps_P <= 1e-12
    assert report.sampling_term == 0.0
    assert report.generalization_value is None
    assert len(report.cmi_per_agent) == 2
    assert report.observed_gap >= -1e-6
    assert report.observed_gap <= report.bound_value


def test_oracle_report_on_shipped_coupled_game():
    game = TabularGame.from_file(f"{CONFIGS}/coupled_game.json")
    report = oracle_report(game, uniform_distribution(game), [(0,), (0, 1)], iterations=20)
    assert report.eps_r == pytest.approx(0.0, abs=1e-12)
    assert report.N == 2 and report.K == 20
    assert report.concentrability_universal == pytest.approx(game.n_states * game.n_actions)
    assert report.generalization_value is not None
    assert report.bound_value > 0
