"""
Finite MDP with an implicit cemetery state.

This module provides:
- FiniteMdpModel: states, per-state action sets, substochastic kernel, cost tables
- ConstrainedProblem: a model plus constraint bounds d_1..d_J
- validate_model: builds a model from a raw (parsed JSON) mapping
- make_stopping_mdp: adds an absorbing STOP action at every state

State-action pairs are laid out state-major: all actions of the first state,
then all actions of the second state, and so on. Every array indexed by pairs
(kernel rows, cost columns, strategy weights, occupation entries) uses this
order. The cemetery is never indexed; the missing row mass of a pair is its
absorption probability.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from utils.constants import (
    STOP_ACTION,
    PAIR_KEY_SEPARATOR,
    ROW_SUM_TOLERANCE,
    NEGATIVE_CLAMP_TOLERANCE,
    ABSORPTION_ZERO_TOLERANCE,
)
from utils.errors import (
    ModelValidationError,
    RowSumExceedsOne,
    NegativeProbability,
    NegativeCost,
    NonFiniteValue,
    UnknownStateReference,
    UnknownActionReference,
    EmptyActionSet,
    DuplicateIdentifier,
    ActionNameClash,
    ParseError,
    ShapeMismatch,
)
from utils.logging_config import get_logger

logger = get_logger(__name__)

Pair = Tuple[str, str]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class FiniteMdpModel:
    """
    Finite MDP with J+1 nonnegative cost tables.

    Attributes:
        states: Ordered state identifiers
        actions: Per-state ordered action identifiers
        kernel: (n_pairs, n_states) transition probabilities p(y|x,a)
        costs: (J+1, n_pairs) cost tables r_0..r_J
        initial: Index of the initial state
        cost_names: Names of the cost tables
        absorption: (n_pairs,) probability of moving to the cemetery
    """
    states: Tuple[str, ...]
    actions: Tuple[Tuple[str, ...], ...]
    kernel: np.ndarray
    costs: np.ndarray
    initial: int
    cost_names: Tuple[str, ...]
    absorption: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        deficit = 1.0 - self.kernel.sum(axis=1)
        deficit[deficit <= ABSORPTION_ZERO_TOLERANCE] = 0.0
        object.__setattr__(self, 'absorption', _frozen(deficit))

    @classmethod
    def from_arrays(cls, states: Sequence[str], actions: Sequence[Sequence[str]],
                    kernel: Any, costs: Any, initial: Union[int, str] = 0,
                    cost_names: Optional[Sequence[str]] = None) -> 'FiniteMdpModel':
        """
        Build a validated model from dense arrays.

        Args:
            states: State identifiers
            actions: Action identifiers per state
            kernel: (n_pairs, n_states) transition probabilities
            costs: (n_pairs,) single table or (J+1, n_pairs) tables
            initial: Initial state index or identifier
            cost_names: Optional names of the cost tables (default r0, r1, ...)

        Returns:
            Validated FiniteMdpModel

        Raises:
            ModelValidationError: If any model invariant is violated

        Example:
            >>> model = FiniteMdpModel.from_arrays(
            ...     ["s0"], [["a"]], [[0.5]], [1.0])
            >>> float(model.absorption[0])
            0.5
        """
        states = tuple(str(s) for s in states)
        actions = tuple(tuple(str(a) for a in acts) for acts in actions)

        if not states:
            raise ModelValidationError("Model must declare at least one state")
        if len(set(states)) != len(states):
            raise DuplicateIdentifier(f"Duplicate state identifier in {list(states)}")
        if len(actions) != len(states):
            raise ShapeMismatch(f"Expected action sets for {len(states)} states, got {len(actions)}")
        for state, acts in zip(states, actions):
            if not acts:
                raise EmptyActionSet(f"State '{state}' has no actions")
            if len(set(acts)) != len(acts):
                raise DuplicateIdentifier(f"Duplicate action identifier at state '{state}'")

        n_pairs = sum(len(acts) for acts in actions)
        kernel = np.array(kernel, dtype=float)
        if kernel.shape != (n_pairs, len(states)):
            raise ShapeMismatch(f"Kernel must have shape {(n_pairs, len(states))}, got {kernel.shape}")

        costs = np.array(costs, dtype=float)
        if costs.ndim == 1:
            costs = costs.reshape(1, -1)
        if costs.ndim != 2 or costs.shape[1] != n_pairs or costs.shape[0] < 1:
            raise ShapeMismatch(f"Costs must have shape (J+1, {n_pairs}), got {costs.shape}")

        if cost_names is None:
            cost_names = tuple(f"r{j}" for j in range(costs.shape[0]))
        cost_names = tuple(str(n) for n in cost_names)
        if len(cost_names) != costs.shape[0]:
            raise ShapeMismatch(f"Expected {costs.shape[0]} cost names, got {len(cost_names)}")
        if len(set(cost_names)) != len(cost_names):
            raise DuplicateIdentifier(f"Duplicate cost name in {list(cost_names)}")

        if isinstance(initial, str):
            if initial not in states:
                raise UnknownStateReference(f"Initial state '{initial}' is not declared")
            initial = states.index(initial)
        if not 0 <= int(initial) < len(states):
            raise UnknownStateReference(f"Initial state index {initial} out of range")

        labels = [(s, a) for s, acts in zip(states, actions) for a in acts]

        if not np.all(np.isfinite(kernel)):
            row = int(np.argwhere(~np.isfinite(kernel))[0][0])
            raise NonFiniteValue(f"Non-finite transition probability at {labels[row]}")
        if np.any(kernel < -NEGATIVE_CLAMP_TOLERANCE):
            row = int(np.argwhere(kernel < -NEGATIVE_CLAMP_TOLERANCE)[0][0])
            raise NegativeProbability(f"Negative transition probability at {labels[row]}")
        if np.any(kernel < 0.0):
            logger.debug("Clamping round-off negative probabilities to 0")
            kernel = np.maximum(kernel, 0.0)

        row_sums = kernel.sum(axis=1)
        if np.any(row_sums > 1.0 + ROW_SUM_TOLERANCE):
            row = int(np.argmax(row_sums))
            raise RowSumExceedsOne(
                f"Transition row {labels[row]} sums to {row_sums[row]!r} > 1"
            )

        if not np.all(np.isfinite(costs)):
            j, p = np.argwhere(~np.isfinite(costs))[0]
            raise NonFiniteValue(f"Non-finite cost '{cost_names[j]}' at {labels[p]}")
        if np.any(costs < 0.0):
            j, p = np.argwhere(costs < 0.0)[0]
            raise NegativeCost(f"Negative cost '{cost_names[j]}' at {labels[p]}: {costs[j, p]!r}")

        return cls(
            states=states,
            actions=actions,
            kernel=_frozen(kernel),
            costs=_frozen(costs),
            initial=int(initial),
            cost_names=cost_names,
        )

    # ------------------------------------------------------------------
    # Shape helpers
    # ------------------------------------------------------------------

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_pairs(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_costs(self) -> int:
        """Number of cost tables, J+1."""
        return self.costs.shape[0]

    @property
    def n_constraints(self) -> int:
        """Number of constrained costs, J."""
        return self.costs.shape[0] - 1

    @property
    def initial_state(self) -> str:
        return self.states[self.initial]

    @cached_property
    def offsets(self) -> np.ndarray:
        """Start index of every state's pair block, plus the total pair count."""
        sizes = [len(acts) for acts in self.actions]
        return np.concatenate([[0], np.cumsum(sizes)]).astype(int)

    @cached_property
    def pair_state(self) -> np.ndarray:
        """State index of every pair."""
        return np.repeat(np.arange(self.n_states), np.diff(self.offsets))

    @cached_property
    def incidence(self) -> np.ndarray:
        """(n_states, n_pairs) 0/1 matrix; row x selects the pairs of state x."""
        matrix = np.zeros((self.n_states, self.n_pairs))
        matrix[self.pair_state, np.arange(self.n_pairs)] = 1.0
        return matrix

    @cached_property
    def pair_labels(self) -> Tuple[Pair, ...]:
        return tuple((s, a) for s, acts in zip(self.states, self.actions) for a in acts)

    @cached_property
    def pair_index(self) -> Dict[Pair, int]:
        return {label: i for i, label in enumerate(self.pair_labels)}

    @cached_property
    def state_index(self) -> Dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    def initial_distribution(self) -> np.ndarray:
        """Dirac distribution at the initial state."""
        nu = np.zeros(self.n_states)
        nu[self.initial] = 1.0
        return nu

    def pairs_of(self, state: int) -> range:
        """Pair indices of a state."""
        return range(self.offsets[state], self.offsets[state + 1])

    def lookup_pair(self, state: str, action: str) -> int:
        """
        Resolve a (state, action) pair to its index.

        Raises:
            UnknownStateReference: If the state is not declared
            UnknownActionReference: If the action is not available at the state
        """
        if state not in self.state_index:
            raise UnknownStateReference(f"Unknown state '{state}'")
        try:
            return self.pair_index[(state, action)]
        except KeyError:
            raise UnknownActionReference(f"Action '{action}' is not available at state '{state}'")

    def same_shape(self, other: 'FiniteMdpModel') -> bool:
        """True when both models have identical states and action sets."""
        return other is self or (other.states == self.states and other.actions == self.actions)

    def require_same_shape(self, other: 'FiniteMdpModel', what: str = "object") -> None:
        if not self.same_shape(other):
            raise ShapeMismatch(f"{what} was built over a different model")

    # ------------------------------------------------------------------
    # Derived models
    # ------------------------------------------------------------------

    def with_costs(self, costs: Any, cost_names: Sequence[str]) -> 'FiniteMdpModel':
        """Copy of the model with other cost tables (same dynamics)."""
        return FiniteMdpModel.from_arrays(
            self.states, self.actions, self.kernel, costs, self.initial, cost_names
        )

    def replace_kernel(self, kernel: Any) -> 'FiniteMdpModel':
        """Copy of the model with another transition kernel (same costs)."""
        return FiniteMdpModel.from_arrays(
            self.states, self.actions, kernel, self.costs, self.initial, self.cost_names
        )

    def __repr__(self) -> str:
        return (f"FiniteMdpModel(states={self.n_states}, pairs={self.n_pairs}, "
                f"costs={list(self.cost_names)}, initial='{self.initial_state}')")


@dataclass(frozen=True, eq=False)
class ConstrainedProblem:
    """Minimize R_0 subject to R_j <= d_j for j = 1..J."""
    model: FiniteMdpModel
    bounds: Tuple[float, ...] = ()

    def __post_init__(self):
        bounds = tuple(float(d) for d in self.bounds)
        if len(bounds) != self.model.n_constraints:
            raise ShapeMismatch(
                f"Model has {self.model.n_constraints} constrained costs but "
                f"{len(bounds)} bounds were given"
            )
        for name, bound in zip(self.model.cost_names[1:], bounds):
            if not math.isfinite(bound):
                raise NonFiniteValue(f"Bound of '{name}' is not finite: {bound!r}")
        object.__setattr__(self, 'bounds', bounds)

    @property
    def n_constraints(self) -> int:
        return len(self.bounds)

    @property
    def objective_name(self) -> str:
        return self.model.cost_names[0]

    def reindexed_for_feasibility(self) -> 'ConstrainedProblem':
        """
        Problem that minimizes R_1 subject to R_2..R_J.

        Any solution with R_1 <= d_1 is feasible for the original problem.

        Raises:
            ModelValidationError: If the problem has no constraint (J = 0)
        """
        if self.n_constraints < 1:
            raise ModelValidationError("Feasibility mode requires at least one constraint")
        model = self.model.with_costs(self.model.costs[1:], self.model.cost_names[1:])
        return ConstrainedProblem(model, self.bounds[1:])


# ============================================================================
# RAW MODEL VALIDATION
# ============================================================================

def _require(raw: Mapping[str, Any], key: str) -> Any:
    if key not in raw:
        raise ParseError("Missing required key", key=key)
    return raw[key]


def _number(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"Expected a number, got {value!r}", key=key)
    return float(value)


def _identifier(value: Any, key: str) -> str:
    if not isinstance(value, str) or not value:
        raise ParseError(f"Expected a non-empty string, got {value!r}", key=key)
    return value


def _parse_actions(raw_actions: Any, states: Tuple[str, ...]) -> Tuple[Tuple[str, ...], ...]:
    """Accepts a shared list, a per-state mapping, or a list of per-state lists."""
    if isinstance(raw_actions, Mapping):
        for state in raw_actions:
            if state not in states:
                raise UnknownStateReference(f"Action set given for unknown state '{state}'")
        per_state = [raw_actions.get(state, []) for state in states]
    elif isinstance(raw_actions, list) and all(isinstance(a, str) for a in raw_actions):
        per_state = [raw_actions for _ in states]
    elif isinstance(raw_actions, list) and all(isinstance(a, list) for a in raw_actions):
        if len(raw_actions) != len(states):
            raise ParseError(
                f"Expected {len(states)} per-state action lists, got {len(raw_actions)}",
                key="actions",
            )
        per_state = raw_actions
    else:
        raise ParseError("Expected a list or a state -> list mapping", key="actions")

    result = []
    for state, acts in zip(states, per_state):
        if not isinstance(acts, list):
            raise ParseError(f"Action set of '{state}' must be a list", key="actions")
        if not acts:
            raise EmptyActionSet(f"State '{state}' has no actions")
        result.append(tuple(_identifier(a, f"actions.{state}") for a in acts))
    return tuple(result)


def validate_model(raw: Mapping[str, Any]) -> FiniteMdpModel:
    """
    Build a FiniteMdpModel from a raw model mapping.

    Every (state, action) pair needs exactly one transition entry; an empty
    "to" mapping means immediate absorption. Cost entries are keyed
    "state/action" and default to the table's "default" value (0 if absent).

    Args:
        raw: Mapping with keys states, actions, initial, transitions, costs

    Returns:
        Validated model; cost tables in document order

    Raises:
        ParseError: On missing keys or malformed values
        RowSumExceedsOne: If a transition row sums to more than 1
        NegativeCost: If a cost entry is negative
        UnknownStateReference: If a state identifier is not declared
        EmptyActionSet: If a state has no actions

    Example:
        >>> model = validate_model({
        ...     "states": ["s0"], "actions": ["a"], "initial": "s0",
        ...     "transitions": [{"from": "s0", "action": "a", "to": {"s0": 0.5}}],
        ...     "costs": [{"name": "cost", "entries": {"s0/a": 1.0}}],
        ... })
        >>> float(model.absorption[0])
        0.5
    """
    if not isinstance(raw, Mapping):
        raise ParseError("Model document must be a mapping")

    raw_states = _require(raw, "states")
    if not isinstance(raw_states, list) or not raw_states:
        raise ParseError("Expected a non-empty list of states", key="states")
    states = tuple(_identifier(s, "states") for s in raw_states)
    if len(set(states)) != len(states):
        raise DuplicateIdentifier(f"Duplicate state identifier in {list(states)}")
    state_index = {s: i for i, s in enumerate(states)}

    actions = _parse_actions(_require(raw, "actions"), states)
    for state, acts in zip(states, actions):
        if len(set(acts)) != len(acts):
            raise DuplicateIdentifier(f"Duplicate action identifier at state '{state}'")
    pair_index = {(s, a): i for i, (s, a) in enumerate(
        (s, a) for s, acts in zip(states, actions) for a in acts)}

    initial = _identifier(_require(raw, "initial"), "initial")
    if initial not in state_index:
        raise UnknownStateReference(f"Initial state '{initial}' is not declared")

    # Transitions
    raw_transitions = _require(raw, "transitions")
    if not isinstance(raw_transitions, list):
        raise ParseError("Expected a list of transition entries", key="transitions")
    kernel = np.zeros((len(pair_index), len(states)))
    seen = set()
    for n, entry in enumerate(raw_transitions):
        key = f"transitions[{n}]"
        if not isinstance(entry, Mapping):
            raise ParseError("Transition entry must be a mapping", key=key)
        source = _identifier(_require(entry, "from"), f"{key}.from")
        action = _identifier(_require(entry, "action"), f"{key}.action")
        targets = entry.get("to", {})
        if source not in state_index:
            raise UnknownStateReference(f"Transition from unknown state '{source}'")
        if (source, action) not in pair_index:
            raise UnknownActionReference(f"Action '{action}' is not available at state '{source}'")
        if (source, action) in seen:
            raise DuplicateIdentifier(f"Second transition entry for ({source}, {action})")
        seen.add((source, action))
        if not isinstance(targets, Mapping):
            raise ParseError("'to' must map target states to probabilities", key=f"{key}.to")
        row = pair_index[(source, action)]
        for target, probability in targets.items():
            if target not in state_index:
                raise UnknownStateReference(
                    f"Transition ({source}, {action}) targets unknown state '{target}'"
                )
            value = _number(probability, f"{key}.to.{target}")
            if not math.isfinite(value):
                raise NonFiniteValue(f"Non-finite probability in ({source}, {action}) -> {target}")
            kernel[row, state_index[target]] = value

    missing = [label for label in pair_index if label not in seen]
    if missing:
        state, action = missing[0]
        raise ParseError(f"No transition entry for ({state}, {action})", key="transitions")

    # Costs
    raw_costs = _require(raw, "costs")
    if not isinstance(raw_costs, list) or not raw_costs:
        raise ParseError("Expected a non-empty list of cost tables", key="costs")
    names = []
    tables = []
    for n, table in enumerate(raw_costs):
        key = f"costs[{n}]"
        if not isinstance(table, Mapping):
            raise ParseError("Cost table must be a mapping", key=key)
        name = _identifier(_require(table, "name"), f"{key}.name")
        if name in names:
            raise DuplicateIdentifier(f"Duplicate cost name '{name}'")
        default = _number(table.get("default", 0.0), f"{key}.default")
        values = np.full(len(pair_index), default)
        entries = table.get("entries", {})
        if not isinstance(entries, Mapping):
            raise ParseError("'entries' must map \"state/action\" keys to costs", key=f"{key}.entries")
        for pair_key, value in entries.items():
            state, separator, action = str(pair_key).partition(PAIR_KEY_SEPARATOR)
            if not separator:
                raise ParseError(f"Cost key '{pair_key}' is not of the form state/action",
                                 key=f"{key}.entries")
            if state not in state_index:
                raise UnknownStateReference(f"Cost '{name}' references unknown state '{state}'")
            if (state, action) not in pair_index:
                raise UnknownActionReference(
                    f"Cost '{name}' references action '{action}' not available at '{state}'"
                )
            values[pair_index[(state, action)]] = _number(value, f"{key}.entries.{pair_key}")
        names.append(name)
        tables.append(values)

    model = FiniteMdpModel.from_arrays(states, actions, kernel, np.vstack(tables), initial, names)
    logger.debug(f"Validated {model!r}")
    return model


# ============================================================================
# OPTIMAL STOPPING
# ============================================================================

def make_stopping_mdp(base: FiniteMdpModel,
                      stop_costs: Union[Mapping[str, Any], Sequence[Any], None] = None
                      ) -> FiniteMdpModel:
    """
    Add an absorbing STOP action to every state.

    Args:
        base: Model without a STOP action
        stop_costs: Per-state stop costs, as a state -> value mapping (missing
            states cost 0) or a sequence in state order. A scalar value is
            charged to r_0 only; a vector of length J+1 sets every table.

    Returns:
        Model with action sets A(x) + (STOP,); STOP rows are all zero

    Raises:
        ActionNameClash: If the base model already uses STOP
        NegativeCost: If a stop cost is negative

    Example:
        >>> stopping = make_stopping_mdp(model, {"s0": 10.0})
        >>> stopping.actions[0][-1]
        'STOP'
    """
    for state, acts in zip(base.states, base.actions):
        if STOP_ACTION in acts:
            raise ActionNameClash(f"State '{state}' already has an action named '{STOP_ACTION}'")

    if stop_costs is None:
        per_state = [0.0] * base.n_states
    elif isinstance(stop_costs, Mapping):
        for state in stop_costs:
            if state not in base.state_index:
                raise UnknownStateReference(f"Stop cost given for unknown state '{state}'")
        per_state = [stop_costs.get(state, 0.0) for state in base.states]
    else:
        per_state = list(stop_costs)
        if len(per_state) != base.n_states:
            raise ShapeMismatch(f"Expected {base.n_states} stop costs, got {len(per_state)}")

    stop_table = np.zeros((base.n_costs, base.n_states))
    for x, value in enumerate(per_state):
        vector = np.atleast_1d(np.asarray(value, dtype=float))
        if vector.size == 1:
            stop_table[0, x] = vector[0]
        elif vector.size == base.n_costs:
            stop_table[:, x] = vector
        else:
            raise ShapeMismatch(
                f"Stop cost of '{base.states[x]}' must be a scalar or have {base.n_costs} entries"
            )
    if np.any(stop_table < 0.0):
        raise NegativeCost("Stop costs must be nonnegative")

    actions = tuple(acts + (STOP_ACTION,) for acts in base.actions)
    n_pairs = base.n_pairs + base.n_states
    kernel = np.zeros((n_pairs, base.n_states))
    costs = np.zeros((base.n_costs, n_pairs))

    row = 0
    for x in range(base.n_states):
        block = base.pairs_of(x)
        kernel[row:row + len(block)] = base.kernel[block.start:block.stop]
        costs[:, row:row + len(block)] = base.costs[:, block.start:block.stop]
        row += len(block)
        costs[:, row] = stop_table[:, x]
        row += 1

    stopping = FiniteMdpModel.from_arrays(
        base.states, actions, kernel, costs, base.initial, base.cost_names
    )
    logger.info(f"Built stopping model with {stopping.n_pairs} pairs")
    return stopping
