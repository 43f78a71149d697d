"""
Checker for the penalization assumption of constrained solving.

The assumption holds when no end component made only of all-zero-cost pairs
is reachable from the initial state. Such a component lets a strategy stay
forever (infinite occupation) while every cost integral stays finite.

This module provides:
- check_penalization_assumption: verdict plus witness end component
- stay_forever_strategy: a selector that enters the witness and stays there
- prefix_cost_vector: costs accumulated before entering the witness
"""

from typing import FrozenSet, NamedTuple, Optional, Tuple

import numpy as np

from core.graph_analysis import (
    maximal_end_components,
    support_graph,
    reachable_states,
    distances_to,
)
from core.model import ConstrainedProblem, FiniteMdpModel
from core.strategies import DeterministicStrategy, as_stationary
from utils.config import Tolerances, DEFAULT_TOLERANCES
from utils.logging_config import get_logger
from .occupancy import ObjectiveVector, FinitenessReport, occupation_of_stationary, cost_vector

logger = get_logger(__name__)

Witness = FrozenSet[Tuple[str, str]]


class AssumptionCheck(NamedTuple):
    """Verdict of the penalization check; witness is set when it fails."""
    holds: bool
    witness: Optional[Witness]


def zero_cost_end_components(model: FiniteMdpModel):
    """Maximal end components made of pairs with r_j = 0 for every j."""
    zero_cost = np.all(model.costs == 0.0, axis=0)
    return maximal_end_components(model, zero_cost)


def check_penalization_assumption(problem: ConstrainedProblem) -> AssumptionCheck:
    """
    Check that no reachable end component has all costs zero.

    Args:
        problem: Constrained problem

    Returns:
        AssumptionCheck(True, None), or AssumptionCheck(False, witness) with
        the (state, action) pairs of the reachable zero-cost component of
        lowest state index

    Example:
        >>> check_penalization_assumption(zeroloop_problem)
        AssumptionCheck(holds=False, witness=frozenset({('s0', 'a')}))
    """
    model = problem.model
    reachable = reachable_states(support_graph(model), [model.initial])
    for states, pairs in zero_cost_end_components(model):
        if states & reachable:
            witness = frozenset(model.pair_labels[p] for p in pairs)
            logger.info(f"Penalization assumption violated by {sorted(witness)}")
            return AssumptionCheck(False, witness)
    logger.debug("Penalization assumption holds")
    return AssumptionCheck(True, None)


def _witness_pairs(model: FiniteMdpModel, witness: Witness) -> Tuple[FrozenSet[int], dict]:
    chosen = {}
    for state, action in sorted(witness, key=lambda label: model.pair_index[label]):
        x = model.state_index[state]
        chosen.setdefault(x, model.pair_index[(state, action)])
    return frozenset(chosen), chosen


def stay_forever_strategy(model: FiniteMdpModel, witness: Witness) -> DeterministicStrategy:
    """
    Selector that reaches the witness component with positive probability and
    then never leaves it.

    Inside the component the first witness pair of each state is used;
    elsewhere a first action that moves one step closer to the component in
    the support graph, or the first action when the component is out of reach.
    """
    states, chosen = _witness_pairs(model, witness)
    distance = distances_to(model, states)
    pairs = []
    for x in range(model.n_states):
        if x in chosen:
            pairs.append(chosen[x])
            continue
        pick = model.offsets[x]
        if np.isfinite(distance[x]):
            for p in model.pairs_of(x):
                successors = np.nonzero(model.kernel[p] > 0.0)[0]
                if np.any(distance[successors] == distance[x] - 1):
                    pick = p
                    break
        pairs.append(pick)
    return DeterministicStrategy.from_pairs(model, pairs)


def prefix_cost_vector(model: FiniteMdpModel, selector: DeterministicStrategy, witness: Witness,
                       tolerances: Tolerances = DEFAULT_TOLERANCES) -> ObjectiveVector:
    """
    Expected costs accumulated before the selector enters the witness states.

    Entries are infinite when the selector can also get stuck elsewhere.
    """
    states, _ = _witness_pairs(model, witness)
    kernel = np.array(model.kernel)
    kernel[:, sorted(states)] = 0.0
    stopped = model.replace_kernel(kernel)
    result = occupation_of_stationary(stopped, as_stationary(selector.rebind(stopped)), tolerances)
    if isinstance(result, FinitenessReport):
        return ObjectiveVector(tuple(np.inf for _ in range(model.n_costs)))
    return cost_vector(stopped, result)
