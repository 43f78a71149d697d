"""
Support-graph analysis of finite MDPs.

This module provides:
- Support graphs of a model restricted to a set of state-action pairs
- Reachability and leak analysis (which states can reach the cemetery)
- Closed zero-leak classes used as witnesses of infinite occupation
- Maximal end components restricted to an allowed set of pairs
- Almost-sure absorption analysis for value iteration

All decisions here are exact graph computations on the positive entries of
the kernel; no floating-point thresholds are involved beyond "> 0".
"""

from collections import deque
from typing import FrozenSet, Iterable, List, Optional, Set, Tuple

import networkx as nx
import numpy as np

from utils.logging_config import get_logger
from .model import FiniteMdpModel

logger = get_logger(__name__)

EndComponent = Tuple[FrozenSet[int], FrozenSet[int]]


def _all_pairs(model: FiniteMdpModel) -> np.ndarray:
    return np.ones(model.n_pairs, dtype=bool)


def support_graph(model: FiniteMdpModel, pair_mask: Optional[np.ndarray] = None) -> nx.DiGraph:
    """
    Directed graph on state indices with an edge x -> y whenever some allowed
    pair at x moves to y with positive probability.

    Args:
        model: The model
        pair_mask: Boolean mask of allowed pairs (default: all pairs)

    Returns:
        networkx DiGraph containing every state as a node
    """
    mask = _all_pairs(model) if pair_mask is None else np.asarray(pair_mask, dtype=bool)
    graph = nx.DiGraph()
    graph.add_nodes_from(range(model.n_states))
    rows, cols = np.nonzero(model.kernel[mask] > 0.0)
    sources = model.pair_state[mask][rows]
    graph.add_edges_from(zip(sources.tolist(), cols.tolist()))
    return graph


def reachable_states(graph: nx.DiGraph, sources: Iterable[int]) -> Set[int]:
    """States reachable from any source (sources included)."""
    reached: Set[int] = set()
    for source in sources:
        if source not in reached:
            reached.add(source)
            reached |= nx.descendants(graph, source)
    return reached


def leaking_states(model: FiniteMdpModel, pair_mask: Optional[np.ndarray] = None) -> Set[int]:
    """States with an allowed pair that moves to the cemetery with positive probability."""
    mask = _all_pairs(model) if pair_mask is None else np.asarray(pair_mask, dtype=bool)
    return set(np.unique(model.pair_state[mask & (model.absorption > 0.0)]).tolist())


def states_reaching(graph: nx.DiGraph, targets: Iterable[int]) -> Set[int]:
    """States from which some target is reachable (targets included)."""
    result: Set[int] = set()
    for target in targets:
        if target not in result:
            result.add(target)
            result |= nx.ancestors(graph, target)
    return result


def trapped_states(model: FiniteMdpModel, pair_mask: np.ndarray,
                   sources: Iterable[int]) -> Tuple[Set[int], Set[int]]:
    """
    Reachable states that cannot reach the cemetery.

    Args:
        model: The model
        pair_mask: Pairs used with positive probability
        sources: Support of the initial distribution

    Returns:
        (reachable, trapped) state index sets
    """
    graph = support_graph(model, pair_mask)
    reachable = reachable_states(graph, sources)
    escaping = states_reaching(graph, leaking_states(model, pair_mask))
    return reachable, reachable - escaping


def closed_class_witness(model: FiniteMdpModel, pair_mask: np.ndarray,
                         trapped: Set[int]) -> FrozenSet[int]:
    """
    Pick the bottom strongly connected component of the trapped states with
    the lowest state index. It is closed under the allowed pairs and leaks
    no mass to the cemetery.
    """
    graph = support_graph(model, pair_mask).subgraph(trapped)
    condensed = nx.condensation(graph)
    bottoms = [
        frozenset(condensed.nodes[node]['members'])
        for node in condensed.nodes
        if condensed.out_degree(node) == 0
    ]
    return min(bottoms, key=min)


def maximal_end_components(model: FiniteMdpModel,
                           allowed_pairs: Optional[np.ndarray] = None) -> List[EndComponent]:
    """
    Maximal end components using only allowed pairs.

    An end component is a set of states and pairs such that every pair stays
    inside the set with probability 1 and the induced graph is strongly
    connected. Pairs with positive absorption never belong to one.

    Args:
        model: The model
        allowed_pairs: Boolean mask of usable pairs (default: all pairs)

    Returns:
        List of (states, pairs) index sets ordered by lowest state index
    """
    mask = _all_pairs(model) if allowed_pairs is None else np.array(allowed_pairs, dtype=bool)
    mask &= model.absorption == 0.0
    successors = [frozenset(np.nonzero(model.kernel[p] > 0.0)[0].tolist()) for p in range(model.n_pairs)]

    changed = True
    while changed:
        changed = False
        graph = support_graph(model, mask)
        active = set(np.unique(model.pair_state[mask]).tolist())
        component_of = {}
        for k, component in enumerate(nx.strongly_connected_components(graph.subgraph(active))):
            for state in component:
                component_of[state] = k
        for p in np.nonzero(mask)[0]:
            x = model.pair_state[p]
            if any(component_of.get(y, -1) != component_of[x] for y in successors[p]):
                mask[p] = False
                changed = True

    graph = support_graph(model, mask)
    active = set(np.unique(model.pair_state[mask]).tolist())
    components = []
    for states in nx.strongly_connected_components(graph.subgraph(active)):
        pairs = frozenset(int(p) for p in np.nonzero(mask)[0] if model.pair_state[p] in states)
        components.append((frozenset(int(s) for s in states), pairs))
    components.sort(key=lambda c: min(c[0]))
    logger.debug(f"Found {len(components)} maximal end components")
    return components


def almost_sure_absorbing(model: FiniteMdpModel) -> Tuple[np.ndarray, np.ndarray]:
    """
    States from which some strategy reaches the cemetery with probability 1.

    Returns:
        (state mask, pair mask); the pair mask keeps the pairs of those states
        whose successors all stay inside the state set
    """
    inside = np.ones(model.n_states, dtype=bool)
    while True:
        pair_ok = np.array([
            inside[model.pair_state[p]] and bool(np.all(inside[model.kernel[p] > 0.0]))
            for p in range(model.n_pairs)
        ], dtype=bool)

        # Backward attractor of the cemetery through pairs that stay inside
        winning = np.zeros(model.n_states, dtype=bool)
        frontier = deque()
        for p in np.nonzero(pair_ok & (model.absorption > 0.0))[0]:
            x = model.pair_state[p]
            if not winning[x]:
                winning[x] = True
                frontier.append(x)
        while frontier:
            frontier.popleft()
            hits = pair_ok & ~winning[model.pair_state] & (model.kernel[:, winning] > 0.0).any(axis=1)
            for p in np.nonzero(hits)[0]:
                x = model.pair_state[p]
                if not winning[x]:
                    winning[x] = True
                    frontier.append(x)

        if np.array_equal(winning, inside):
            return inside, pair_ok
        inside = winning


def distances_to(model: FiniteMdpModel, targets: Iterable[int]) -> np.ndarray:
    """Shortest support-graph distance from every state to the target set (inf if none)."""
    graph = support_graph(model).reverse(copy=False)
    distance = np.full(model.n_states, np.inf)
    lengths = nx.multi_source_dijkstra_path_length(graph, set(targets))
    for state, length in lengths.items():
        distance[state] = length
    return distance
