# scamfqi/oracle/information.py - plug-in conditional mutual information (nats)
from typing import Sequence

import numpy as np
from scipy.special import entr

from scamfqi.core.errors import ArgumentError
from scamfqi.models.tabular_game import TabularGame


def _entropy(joint: np.ndarray, keep: Sequence[int]) -> float:
    drop = tuple(ax for ax in range(joint.ndim) if ax not in keep)
    marginal = joint.sum(axis=drop) if drop else joint
    return float(entr(marginal).sum())


def cmi(joint: np.ndarray, members: Sequence[int]) -> float:
    """I(Y; x_{-members} | x_{members}) for a joint table with axes (Y, x_0, ..., x_{m-1}).

    0 log 0 is taken as 0. The result is clipped at 0 against round-off.
    """
    joint = np.asarray(joint, dtype=float)
    if joint.ndim < 2:
        raise ArgumentError("joint needs a target axis and at least one factor axis")
    if np.any(joint < 0) or abs(joint.sum() - 1.0) > 1e-9:
        raise ArgumentError("joint must be a probability table")
    n_factors = joint.ndim - 1
    if any(not 0 <= m < n_factors for m in members):
        raise ArgumentError(f"members {list(members)} out of range for {n_factors} factors")
    u = sorted({m + 1 for m in members})
    v = [ax for ax in range(1, joint.ndim) if ax not in u]
    if not v:
        return 0.0
    value = (
        _entropy(joint, [0] + u)
        + _entropy(joint, u + v)
        - _entropy(joint, u)
        - _entropy(joint, range(joint.ndim))
    )
    return max(value, 0.0)


def target_joint(game: TabularGame, nu: np.ndarray, target: np.ndarray, owner: int, decimals: int = 12) -> np.ndarray:
    """Distribution over (Y, s_0, ..., s_{N-1}, a_owner) for regression target Y = target(s, a).

    Factor axis N (the owner's action) is always conditioned on when
    computing the CMI of a neighborhood.
    """
    target = np.round(np.asarray(target, dtype=float), decimals)
    levels, y_index = np.unique(target, return_inverse=True)
    y_index = y_index.reshape(target.shape)
    shape = (len(levels),) + game.state_sizes + (game.action_sizes[owner],)
    joint = np.zeros(shape)
    comps = game.state_components
    a_i = game.agent_action(owner)
    S, A = target.shape
    ss, aa = np.meshgrid(np.arange(S), np.arange(A), indexing="ij")
    index = (y_index.ravel(),) + tuple(comps[ss.ravel(), j] for j in range(game.agent_count)) + (a_i[aa.ravel()],)
    np.add.at(joint, index, np.asarray(nu, dtype=float).ravel())
    return joint


def neighborhood_cmi(game: TabularGame, nu: np.ndarray, target: np.ndarray, owner: int, members: Sequence[int]) -> float:
    joint = target_joint(game, nu, target, owner)
    return cmi(joint, list(members) + [game.agent_count])
