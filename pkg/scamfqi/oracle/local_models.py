# scamfqi/oracle/local_models.py - induced local models and the error terms they leave behind
import itertools
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from scamfqi.core.errors import ArgumentError, DegenerateSliceError, UnboundedConcentrabilityError
from scamfqi.models.tabular_game import TabularGame
from scamfqi.oracle.bellman import LocalModel, occupancy

logger = logging.getLogger(__name__)

EXHAUSTIVE_SA_LIMIT = 64
EXHAUSTIVE_POLICY_LIMIT = 100_000


def _check_nu(game: TabularGame, nu: np.ndarray) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (game.n_states, game.n_actions):
        raise ArgumentError(f"nu must have shape {(game.n_states, game.n_actions)}, got {nu.shape}")
    if np.any(nu < 0) or abs(nu.sum() - 1.0) > 1e-9:
        raise ArgumentError("nu must be a probability vector over S x A")
    return nu


def _check_members(game: TabularGame, members: Sequence[int], owner: int) -> tuple[int, ...]:
    members = tuple(sorted(set(members)))
    if not 0 <= owner < game.agent_count:
        raise ArgumentError(f"Invalid owner {owner}")
    if owner not in members:
        raise ArgumentError(f"owner {owner} must belong to its own neighborhood {members}")
    if any(not 0 <= j < game.agent_count for j in members):
        raise ArgumentError(f"members {members} out of range")
    return members


@dataclass(frozen=True)
class SliceIndex:
    """Where each joint (s, a) lands once restricted to (s_{N_i}, a_i)."""

    u: np.ndarray  # (S,)
    a: np.ndarray  # (A,)
    mass: np.ndarray  # (L, A_i)

    def broadcast(self, table: np.ndarray) -> np.ndarray:
        return table[self.u[:, None], self.a[None, :]]

    def accumulate(self, weights: np.ndarray) -> np.ndarray:
        shape = self.mass.shape + weights.shape[2:]
        out = np.zeros(shape)
        np.add.at(out, (self.u[:, None], self.a[None, :]), weights)
        return out


def slice_index(game: TabularGame, nu: np.ndarray, members: Sequence[int], owner: int) -> SliceIndex:
    u = game.local_index(members)
    a = game.agent_action(owner)
    mass = np.zeros((game.local_size(members), game.action_sizes[owner]))
    np.add.at(mass, (u[:, None], a[None, :]), nu)
    empty = np.argwhere(mass <= 0)
    if len(empty):
        raise DegenerateSliceError(owner, tuple(int(x) for x in empty[0]))
    return SliceIndex(u=u, a=a, mass=mass)


def projected_transitions(game: TabularGame, members: Sequence[int]) -> np.ndarray:
    """(S, A, L): P(.|s,a) marginalized onto S_{members}."""
    u = game.local_index(members)
    return game.P @ np.eye(game.local_size(members))[u]


def induce_local_model(game: TabularGame, nu: np.ndarray, members: Sequence[int], owner: int) -> LocalModel:
    """P^i and r_bar_i as nu-conditional expectations given (s_{N_i}, a_i)."""
    nu = _check_nu(game, nu)
    members = _check_members(game, members, owner)
    idx = slice_index(game, nu, members, owner)
    P_local = idx.accumulate(nu[..., None] * projected_transitions(game, members)) / idx.mass[..., None]
    r_local = idx.accumulate(nu * game.rewards[owner]) / idx.mass
    return LocalModel(owner=owner, members=members, P=P_local, r=r_local)


def induce_local_models(game: TabularGame, nu: np.ndarray, neighborhoods: Sequence[Sequence[int]]) -> list[LocalModel]:
    return [induce_local_model(game, nu, members, i) for i, members in enumerate(neighborhoods)]


def epsilon_terms(game: TabularGame, local_models: Sequence[LocalModel | None], nu: np.ndarray) -> tuple[float, float]:
    """(eps_r, eps_P): summed nu-weighted L1 gaps between true and local models."""
    nu = _check_nu(game, nu)
    if len(local_models) != game.agent_count:
        raise ArgumentError(f"expected {game.agent_count} local models, got {len(local_models)}")
    eps_r = 0.0
    eps_p = 0.0
    for i, model in enumerate(local_models):
        if model is None:
            raise ArgumentError(f"missing local model for agent {i}")
        u = game.local_index(model.members)
        a = game.agent_action(i)
        r_bar = model.r[u[:, None], a[None, :]]
        eps_r += float(np.sum(nu * np.abs(game.rewards[i] - r_bar)))
        P_bar = model.P[u[:, None], a[None, :]]
        l1 = np.abs(projected_transitions(game, model.members) - P_bar).sum(axis=2)
        eps_p += float(np.sum(nu * l1))
    return eps_r, eps_p


def deterministic_policies(game: TabularGame):
    S, A = game.n_states, game.n_actions
    if S * A > EXHAUSTIVE_SA_LIMIT or A ** S > EXHAUSTIVE_POLICY_LIMIT:
        raise ArgumentError(
            f"exhaustive policy enumeration refused for |S|={S}, |A|={A} "
            f"(limits |S||A| <= {EXHAUSTIVE_SA_LIMIT}, |A|^|S| <= {EXHAUSTIVE_POLICY_LIMIT})"
        )
    eye = np.eye(A)
    for choice in itertools.product(range(A), repeat=S):
        yield eye[list(choice)]


def concentrability(
    game: TabularGame,
    nu: np.ndarray,
    policies: Sequence[np.ndarray],
    exhaustive: bool = False,
) -> tuple[float, float]:
    """(max_pi max_{s,a} d^pi(s,a)/nu(s,a) over the supplied policies, 1/min nu)."""
    nu = _check_nu(game, nu)
    if np.any(nu <= 0):
        raise UnboundedConcentrabilityError("nu has zero entries: concentrability is unbounded")
    universal = float(1.0 / nu.min())
    candidates = list(policies)
    if exhaustive:
        candidates.extend(deterministic_policies(game))
    c = 0.0
    for policy in candidates:
        _, d_sa = occupancy(game, policy)
        c = max(c, float(np.max(d_sa / nu)))
    return c, universal


def conditional_mean(game: TabularGame, nu: np.ndarray, members: Sequence[int], owner: int, target: np.ndarray) -> np.ndarray:
    """argmin over tables on (s_{N_i}, a_i) of ||f - target||_{2,nu}^2."""
    idx = slice_index(game, nu, members, owner)
    return idx.accumulate(nu * target) / idx.mass


def _restricted_error(game, nu, members, owner, target) -> float:
    idx = slice_index(game, nu, members, owner)
    mean = idx.accumulate(nu * target) / idx.mass
    return float(np.sum(nu * (target - idx.broadcast(mean)) ** 2))


def inherent_error(
    game: TabularGame,
    nu: np.ndarray,
    members: Sequence[int],
    owner: int,
    target: np.ndarray,
) -> tuple[float, float]:
    """(E_nu Var(target | s_{N_i}, a_i), E_nu Var(target | s, a_i))."""
    nu = _check_nu(game, nu)
    members = _check_members(game, members, owner)
    target = np.asarray(target, dtype=float)
    if target.shape != (game.n_states, game.n_actions):
        raise ArgumentError(f"target must have shape {(game.n_states, game.n_actions)}")
    restricted = _restricted_error(game, nu, members, owner, target)
    full = _restricted_error(game, nu, tuple(range(game.agent_count)), owner, target)
    return restricted, full


def agent_target(game: TabularGame, owner: int, members: Sequence[int], q_local: np.ndarray) -> np.ndarray:
    """r_i(s,a) + gamma E_{s'~P} max_a' q_local(s'_{N_i}, a') on the joint support."""
    u = game.local_index(members)
    return game.rewards[owner] + game.gamma * (game.P @ q_local.max(axis=1)[u])


@dataclass
class PopulationFQIResult:
    neighborhoods: list[tuple[int, ...]]
    # q_tables[k][i] is agent i's local table after k iterations (k = 0 is all zeros)
    q_tables: list[list[np.ndarray]]
    restricted_errors: np.ndarray  # (K, N)
    full_errors: np.ndarray  # (K, N)
    targets: list[np.ndarray]  # last-iteration target per agent

    @property
    def eps_inh(self) -> float:
        return float(self.restricted_errors.max(initial=0.0))


def population_fqi(
    game: TabularGame,
    nu: np.ndarray,
    neighborhoods: Sequence[Sequence[int]],
    iterations: int,
) -> PopulationFQIResult:
    """The iteration run on the nu-population instead of samples.

    Each agent regresses its true-dynamics target onto tables over
    (s_{N_i}, a_i); the restricted least-squares solution is the
    conditional mean, and its residual is the per-iteration inherent error.
    """
    nu = _check_nu(game, nu)
    if iterations < 1:
        raise ArgumentError("iterations must be >= 1")
    hoods = [_check_members(game, m, i) for i, m in enumerate(neighborhoods)]
    q = [np.zeros((game.local_size(m), game.action_sizes[i])) for i, m in enumerate(hoods)]
    history = [list(q)]
    restricted = np.zeros((iterations, game.agent_count))
    full = np.zeros((iterations, game.agent_count))
    targets = [np.zeros((game.n_states, game.n_actions)) for _ in hoods]
    for k in range(iterations):
        nxt = []
        for i, members in enumerate(hoods):
            target = agent_target(game, i, members, q[i])
            nxt.append(conditional_mean(game, nu, members, i, target))
            restricted[k, i], full[k, i] = inherent_error(game, nu, members, i, target)
            targets[i] = target
        q = nxt
        history.append(list(q))
        logger.debug("population FQI k=%d restricted errors %s", k + 1, restricted[k])
    return PopulationFQIResult(hoods, history, restricted, full, targets)
