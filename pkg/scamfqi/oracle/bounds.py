# scamfqi/oracle/bounds.py - convergence bound and the tabular report pipeline
import logging
import math
from typing import Sequence

import numpy as np

from scamfqi.core.errors import ArgumentError
from scamfqi.models.tabular_game import TabularGame
from scamfqi.oracle.bellman import (
    exact_q_star,
    greedy_local_policy,
    joint_policy,
    policy_q,
    state_value,
    uniform_policy,
)
from scamfqi.oracle.information import neighborhood_cmi
from scamfqi.oracle.local_models import (
    concentrability,
    epsilon_terms,
    induce_local_models,
    population_fqi,
)
from scamfqi.schemas.reports import BoundInputs, BoundReport

logger = logging.getLogger(__name__)


def _check_common(gamma: float, K: int, delta: float | None = None) -> None:
    if not 0.0 <= gamma < 1.0:
        raise ArgumentError(f"gamma must lie in [0, 1), got {gamma}")
    if K < 1:
        raise ArgumentError(f"K must be >= 1, got {K}")
    if delta is not None and not 0.0 < delta < 1.0:
        raise ArgumentError(f"delta must lie in (0, 1), got {delta}")


def propagation_bound(gamma: float, K: int, v_max: float, C: float, eps_r: float, eps_P: float, N: int, eps: float) -> float:
    """Performance gap when every per-agent regression error is at most eps."""
    _check_common(gamma, K)
    root_c = math.sqrt(C)
    head = 2.0 * gamma ** (K - 1) / (1.0 - gamma) * (gamma * v_max + root_c * eps_r + root_c * gamma / (1.0 - gamma) * eps_P)
    return head + 2.0 * N * root_c / (1.0 - gamma) ** 2 * eps


def generalization_bound(v_max: float, function_class_size: float, K: int, N: int, delta: float, dataset_size: float, eps_inh: float) -> float:
    """Squared regression error bound holding w.p. 1 - delta (reported, not enforced)."""
    if dataset_size <= 0:
        raise ArgumentError("dataset_size must be positive")
    if not 0.0 < delta < 1.0:
        raise ArgumentError(f"delta must lie in (0, 1), got {delta}")
    return 22.0 * v_max ** 2 * math.log(function_class_size * K * N / delta) / dataset_size + 20.0 * eps_inh


def bound_terms(inputs: BoundInputs) -> tuple[float, float, float]:
    g, K = inputs.gamma, inputs.K
    _check_common(g, K, inputs.delta)
    if inputs.dataset_size is not None and inputs.dataset_size <= 0:
        raise ArgumentError("dataset_size must be positive")
    root_c = math.sqrt(inputs.C)
    bias = 2.0 * g ** (K - 1) / (1.0 - g) * (
        g * inputs.V_max + root_c * inputs.eps_r + root_c * g / (1.0 - g) * inputs.eps_P
    )
    scale = 2.0 * inputs.N / (1.0 - g) ** 2
    if inputs.dataset_size is None:
        sampling = 0.0
    else:
        log_term = math.log(inputs.function_class_size * K * inputs.N / inputs.delta)
        sampling = scale * math.sqrt(22.0 * inputs.C * inputs.V_max ** 2 * log_term / inputs.dataset_size)
    inherent = scale * math.sqrt(20.0 * inputs.eps_inh)
    return bias, sampling, inherent


def convergence_bound(inputs: BoundInputs, **diagnostics) -> BoundReport:
    """Right-hand side of the convergence guarantee.

    |F| is user supplied: for tree ensembles the function class is not
    finite, so the value is only indicative.
    """
    bias, sampling, inherent = bound_terms(inputs)
    return BoundReport(
        **inputs.model_dump(),
        bias_term=bias,
        sampling_term=sampling,
        inherent_term=inherent,
        bound_value=bias + sampling + inherent,
        **diagnostics,
    )


def oracle_report(
    game: TabularGame,
    nu: np.ndarray,
    neighborhoods: Sequence[Sequence[int]],
    iterations: int,
    delta: float = 0.05,
    function_class_size: float = 100.0,
    dataset_size: float | None = 10_000.0,
    tol: float = 1e-8,
) -> BoundReport:
    """Every bound quantity for one game, sharing structure and data distribution."""
    hoods = [tuple(sorted(m)) for m in neighborhoods]
    models = induce_local_models(game, nu, hoods)
    eps_r, eps_p = epsilon_terms(game, models, nu)
    result = population_fqi(game, nu, hoods, iterations)

    greedy = joint_policy(game, [greedy_local_policy(q) for q in result.q_tables[-1]], hoods)
    c, universal = concentrability(game, nu, [greedy, uniform_policy(game)])

    q_star = exact_q_star(game, tol)
    v_star = state_value(game, q_star.values, greedy_local_policy(q_star.values))
    v_k = state_value(game, policy_q(game, greedy), greedy)

    cmis = [neighborhood_cmi(game, nu, result.targets[i], i, hoods[i]) for i in range(game.agent_count)]
    logger.info("oracle: eps_r=%.4g eps_P=%.4g eps_inh=%.4g C=%.4g gap=%.4g", eps_r, eps_p, result.eps_inh, c, v_star - v_k)

    inputs = BoundInputs(
        eps_r=eps_r,
        eps_P=eps_p,
        eps_inh=result.eps_inh,
        C=c,
        V_max=game.v_max,
        K=iterations,
        N=game.agent_count,
        gamma=game.gamma,
        delta=delta,
        dataset_size=dataset_size,
        function_class_size=function_class_size,
        cmi_per_agent=cmis,
    )
    generalization = None
    if dataset_size is not None:
        generalization = generalization_bound(game.v_max, function_class_size, iterations, game.agent_count, delta, dataset_size, result.eps_inh)
    return convergence_bound(
        inputs,
        eps_restricted_per_agent=[float(x) for x in result.restricted_errors[-1]],
        sigma_sq_per_agent=[float(x) for x in result.full_errors[-1]],
        concentrability_universal=universal,
        generalization_value=generalization,
        observed_gap=float(v_star - v_k),
    )
