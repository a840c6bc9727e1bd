# scamfqi/models/sharing.py - neighborhoods and observation projection
import logging
import operator
from typing import Iterable, Sequence

import networkx as nx

from scamfqi.core.errors import ArgumentError
from scamfqi.models.game import FactoredState, ObservationEncoder
from scamfqi.schemas.graph import Observation, ObservationMode, SharingGraph

logger = logging.getLogger(__name__)


def _check_agent(graph: SharingGraph, i: int) -> int:
    try:
        index = operator.index(i)
    except TypeError:
        raise ArgumentError(f"Invalid agent id {i!r}: not an integer") from None
    if not 0 <= index < graph.agent_count:
        raise ArgumentError(f"Invalid agent id {i!r} for a graph of {graph.agent_count} agents")
    return index


def neighborhood(graph: SharingGraph, i: int) -> tuple[int, ...]:
    """N_i = {j : (i, j) in E}; always contains i."""
    i = _check_agent(graph, i)
    return tuple(sorted(j for (src, j) in graph.edges if src == i))


def neighborhoods(graph: SharingGraph) -> list[tuple[int, ...]]:
    members: list[set[int]] = [set() for _ in range(graph.agent_count)]
    for i, j in graph.edges:
        members[i].add(j)
    return [tuple(sorted(m)) for m in members]


def project(
    state: FactoredState,
    members: Sequence[int],
    encoder: ObservationEncoder,
    mode: ObservationMode,
    owner: int | None = None,
) -> Observation:
    """s_{N_i}: the owner is always encoded Full, the others with `mode`."""
    if not members:
        raise ArgumentError("members must be non-empty")
    members = tuple(sorted(members))
    for j in members:
        if not 0 <= j < state.agent_count:
            raise ArgumentError(f"Member {j} out of range for a state of {state.agent_count} agents")
    if owner is None:
        owner = members[0]
    values = tuple(
        encoder.encode(state.components[j], ObservationMode.FULL if j == owner else mode)
        for j in members
    )
    return Observation(owner=owner, members=members, values=values, mode=mode)


def graph_from_neighborhoods(sets: Sequence[Iterable[int]]) -> SharingGraph:
    edges = [(i, j) for i, members in enumerate(sets) for j in members]
    return SharingGraph(agent_count=len(sets), edges=tuple(edges))


def self_loop_graph(n: int) -> SharingGraph:
    return SharingGraph(agent_count=n)


def complete_graph(n: int) -> SharingGraph:
    return SharingGraph(agent_count=n, edges=tuple((i, j) for i in range(n) for j in range(n)))


def distance_neighborhood(layout: nx.Graph, i: int, d: int) -> tuple[int, ...]:
    """{j : hops(i, j) < d} plus i itself; d = 0 still yields {i}."""
    if i not in layout:
        raise ArgumentError(f"Agent {i} is not part of the layout")
    if d < 0:
        raise ArgumentError(f"d must be non-negative, got {d}")
    if d <= 1:
        return (i,)
    hops = nx.single_source_shortest_path_length(layout, i, cutoff=d - 1)
    return tuple(sorted(set(hops) | {i}))


def distance_graph(layout: nx.Graph, d: int) -> SharingGraph:
    n = layout.number_of_nodes()
    graph = graph_from_neighborhoods([distance_neighborhood(layout, i, d) for i in range(n)])
    logger.debug("distance graph d=%d: %d edges over %d agents", d, len(graph.edges), n)
    return graph
