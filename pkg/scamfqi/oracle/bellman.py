# scamfqi/oracle/bellman.py - exact Bellman operators and policy quantities
import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import linalg

from scamfqi.core.config import RANGE_TOL
from scamfqi.core.errors import ArgumentError, OracleError
from scamfqi.models.tabular_game import TabularGame

logger = logging.getLogger(__name__)

MAX_VALUE_ITERATIONS = 200_000


@dataclass(frozen=True)
class QTable:
    """Dense Q table on the joint (S x A) or a local (S_{N_i} x A_i) support."""

    values: np.ndarray
    support: Literal["joint", "local"]
    v_max: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ArgumentError(f"Q table must be 2-d, got shape {values.shape}")
        if values.min(initial=0.0) < -RANGE_TOL or values.max(initial=0.0) > self.v_max + RANGE_TOL:
            raise ArgumentError(
                f"Q values outside [0, {self.v_max}]: min={values.min()}, max={values.max()}"
            )
        object.__setattr__(self, "values", np.clip(values, 0.0, self.v_max))

    def greedy(self) -> np.ndarray:
        # np.argmax returns the first maximiser: ties go to the lowest action id
        return np.argmax(self.values, axis=1)


@dataclass(frozen=True)
class LocalModel:
    """Induced local transitions P^i and rewards r_bar_i of one agent."""

    owner: int
    members: tuple[int, ...]
    P: np.ndarray  # (L, A_i, L)
    r: np.ndarray  # (L, A_i)


def zero_q(game: TabularGame) -> QTable:
    return QTable(np.zeros((game.n_states, game.n_actions)), "joint", game.v_max)


def centralized_bellman(f: QTable, game: TabularGame) -> QTable:
    """T f(s,a) = r(s,a) + gamma E_{s'~P(.|s,a)} max_a' f(s',a')."""
    if f.support != "joint" or f.values.shape != (game.n_states, game.n_actions):
        raise ArgumentError(
            f"centralized_bellman expects a joint table of shape {(game.n_states, game.n_actions)}, "
            f"got {f.support} {f.values.shape}"
        )
    out = game.joint_reward + game.gamma * (game.P @ f.values.max(axis=1))
    return QTable(out, "joint", game.v_max)


def local_bellman(f_i: QTable, model: LocalModel, gamma: float) -> QTable:
    """T_bar^i f_i(u,a_i) = r_bar_i(u,a_i) + gamma E_{u'~P^i(.|u,a_i)} max f_i(u',.)."""
    if f_i.support != "local" or f_i.values.shape != model.r.shape:
        raise ArgumentError(
            f"local_bellman expects a local table of shape {model.r.shape}, got {f_i.support} {f_i.values.shape}"
        )
    out = model.r + gamma * (model.P @ f_i.values.max(axis=1))
    return QTable(out, "local", f_i.v_max)


def exact_q_star(game: TabularGame, tol: float = 1e-8) -> QTable:
    """Value iteration until ||Q - Q*||_inf <= tol."""
    if tol <= 0:
        raise ArgumentError(f"tol must be positive, got {tol}")
    q = zero_q(game)
    threshold = np.inf if game.gamma == 0 else tol * (1.0 - game.gamma) / (2.0 * game.gamma)
    for it in range(1, MAX_VALUE_ITERATIONS + 1):
        nxt = centralized_bellman(q, game)
        diff = float(np.max(np.abs(nxt.values - q.values), initial=0.0))
        q = nxt
        if diff <= threshold:
            logger.debug("value iteration converged after %d sweeps (diff=%.3e)", it, diff)
            return q
    raise OracleError(f"value iteration did not converge within {MAX_VALUE_ITERATIONS} sweeps")


def _check_policy(game: TabularGame, policy: np.ndarray) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (game.n_states, game.n_actions):
        raise ArgumentError(f"policy must have shape {(game.n_states, game.n_actions)}, got {policy.shape}")
    if np.any(policy < 0) or np.max(np.abs(policy.sum(axis=1) - 1.0)) > 1e-9:
        raise ArgumentError("policy rows must be probability vectors")
    return policy


def policy_transition(game: TabularGame, policy: np.ndarray) -> np.ndarray:
    return np.einsum("sa,sat->st", policy, game.P)


def occupancy(game: TabularGame, policy: np.ndarray, mu: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Normalized discounted visitation: (d(s), d(s) pi(a|s))."""
    policy = _check_policy(game, policy)
    mu = game.mu if mu is None else np.asarray(mu, dtype=float)
    if game.gamma == 0:
        d = mu.copy()
    else:
        system = np.eye(game.n_states) - game.gamma * policy_transition(game, policy)
        d = linalg.solve(system.T, (1.0 - game.gamma) * mu)
    d = np.clip(d, 0.0, None)
    d /= d.sum()
    return d, d[:, None] * policy


def policy_q(game: TabularGame, policy: np.ndarray) -> np.ndarray:
    """Exact Q^pi on the joint support."""
    policy = _check_policy(game, policy)
    r = game.joint_reward
    r_pi = np.sum(policy * r, axis=1)
    v = linalg.solve(np.eye(game.n_states) - game.gamma * policy_transition(game, policy), r_pi)
    return r + game.gamma * (game.P @ v)


def state_value(game: TabularGame, q: np.ndarray, policy: np.ndarray, mu: np.ndarray | None = None) -> float:
    """V^pi_mu = E_{s~mu, a~pi} Q(s,a)."""
    mu = game.mu if mu is None else mu
    return float(mu @ np.sum(policy * q, axis=1))


def local_policy_q(model: LocalModel, local_policy: np.ndarray, gamma: float) -> np.ndarray:
    """Decentralized q_i^{pi_i} under the induced local model."""
    P_pi = np.einsum("ua,uav->uv", local_policy, model.P)
    r_pi = np.sum(local_policy * model.r, axis=1)
    v = linalg.solve(np.eye(model.r.shape[0]) - gamma * P_pi, r_pi)
    return model.r + gamma * (model.P @ v)


def greedy_local_policy(q_local: np.ndarray, epsilon: float = 0.0) -> np.ndarray:
    """epsilon-greedy table; the greedy action gets 1 - eps + eps/|A_i|."""
    n_actions = q_local.shape[1]
    probs = np.full(q_local.shape, epsilon / n_actions)
    probs[np.arange(q_local.shape[0]), np.argmax(q_local, axis=1)] += 1.0 - epsilon
    return probs


def joint_policy(game: TabularGame, local_policies: Sequence[np.ndarray], neighborhoods: Sequence[Sequence[int]]) -> np.ndarray:
    """pi(a|s) = prod_i pi_i(a_i | s_{N_i})."""
    if len(local_policies) != game.agent_count or len(neighborhoods) != game.agent_count:
        raise ArgumentError("one local policy and one neighborhood per agent are required")
    pi = np.ones((game.n_states, game.n_actions))
    for i, (local, members) in enumerate(zip(local_policies, neighborhoods)):
        u = game.local_index(members)
        pi *= np.asarray(local)[u[:, None], game.agent_action(i)[None, :]]
    return pi


def uniform_policy(game: TabularGame) -> np.ndarray:
    return np.full((game.n_states, game.n_actions), 1.0 / game.n_actions)
