"""
Strategy classes over a FiniteMdpModel.

This module provides:
- StationaryStrategy: kernel sigma(a|x), stored as one weight per pair
- DeterministicStrategy: selector phi(x), stored as one action index per state
- MarkovStrategy: finite head of stationary kernels plus a stationary tail
- MixedStrategy: initial randomization over deterministic strategies
"""

from dataclasses import dataclass
from typing import Any, Dict, Iterator, Mapping, Sequence, Tuple

import numpy as np

from utils.constants import (
    NEGATIVE_CLAMP_TOLERANCE,
    STRATEGY_ROW_TOLERANCE,
    MIXTURE_WEIGHT_TOLERANCE,
)
from utils.errors import InvalidStrategy, ShapeMismatch, UnknownStateReference
from .model import FiniteMdpModel


@dataclass(frozen=True, eq=False)
class StationaryStrategy:
    """Stationary randomized strategy; weights[p] = sigma(a|x) for pair p = (x, a)."""
    model: FiniteMdpModel
    weights: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        if weights.shape != (self.model.n_pairs,):
            raise ShapeMismatch(f"Strategy needs {self.model.n_pairs} weights, got {weights.shape}")
        if not np.all(np.isfinite(weights)):
            raise InvalidStrategy("Strategy weights must be finite")
        if np.any(weights < -NEGATIVE_CLAMP_TOLERANCE):
            p = int(np.argmin(weights))
            raise InvalidStrategy(f"Negative strategy weight at {self.model.pair_labels[p]}")
        weights = np.maximum(weights, 0.0)

        row_sums = self.model.incidence @ weights
        bad = np.abs(row_sums - 1.0) > STRATEGY_ROW_TOLERANCE
        if np.any(bad):
            x = int(np.argmax(bad))
            raise InvalidStrategy(
                f"Strategy row of state '{self.model.states[x]}' sums to {row_sums[x]!r}"
            )
        weights.flags.writeable = False
        object.__setattr__(self, 'weights', weights)

    @classmethod
    def from_rows(cls, model: FiniteMdpModel,
                  rows: Mapping[str, Mapping[str, float]]) -> 'StationaryStrategy':
        """
        Build a strategy from a state -> {action: probability} mapping.

        Actions missing from a row have probability 0; every state needs a row.
        """
        weights = np.zeros(model.n_pairs)
        for state, row in rows.items():
            if state not in model.state_index:
                raise UnknownStateReference(f"Strategy row for unknown state '{state}'")
            for action, probability in row.items():
                weights[model.lookup_pair(state, action)] = float(probability)
        missing = [s for s in model.states if s not in rows]
        if missing:
            raise InvalidStrategy(f"Strategy has no row for state '{missing[0]}'")
        return cls(model, weights)

    @classmethod
    def uniform(cls, model: FiniteMdpModel) -> 'StationaryStrategy':
        sizes = np.diff(model.offsets)
        return cls(model, 1.0 / sizes[model.pair_state])

    def row(self, state: int) -> np.ndarray:
        """Action distribution at a state, in action order."""
        return self.weights[self.model.offsets[state]:self.model.offsets[state + 1]]

    def support(self) -> np.ndarray:
        """Boolean pair mask of actions used with positive probability."""
        return self.weights > 0.0

    def transition_matrix(self) -> np.ndarray:
        """P_sigma(y|x) = sum_a sigma(a|x) p(y|x,a) as an (n_states, n_states) matrix."""
        return (self.model.incidence * self.weights) @ self.model.kernel

    def absorption_vector(self) -> np.ndarray:
        """Per-state probability of moving to the cemetery in one step."""
        return self.model.incidence @ (self.weights * self.model.absorption)

    def as_rows(self) -> Dict[str, Dict[str, float]]:
        return {
            state: {a: float(w) for a, w in zip(acts, self.row(x))}
            for x, (state, acts) in enumerate(zip(self.model.states, self.model.actions))
        }

    def is_deterministic(self) -> bool:
        return bool(np.all((self.weights == 0.0) | (self.weights == 1.0)))


@dataclass(frozen=True, eq=False)
class DeterministicStrategy:
    """Deterministic stationary strategy; choices[x] indexes A(x)."""
    model: FiniteMdpModel
    choices: Tuple[int, ...]

    def __post_init__(self):
        choices = tuple(int(c) for c in self.choices)
        if len(choices) != self.model.n_states:
            raise ShapeMismatch(f"Selector needs {self.model.n_states} choices, got {len(choices)}")
        for state, acts, choice in zip(self.model.states, self.model.actions, choices):
            if not 0 <= choice < len(acts):
                raise InvalidStrategy(f"Selector choice {choice} is not an action of '{state}'")
        object.__setattr__(self, 'choices', choices)

    @classmethod
    def from_mapping(cls, model: FiniteMdpModel, mapping: Mapping[str, str]) -> 'DeterministicStrategy':
        """Build a selector from a state -> action mapping covering every state."""
        for state in mapping:
            if state not in model.state_index:
                raise UnknownStateReference(f"Selector names unknown state '{state}'")
        choices = []
        for x, state in enumerate(model.states):
            if state not in mapping:
                raise InvalidStrategy(f"Selector has no action for state '{state}'")
            choices.append(model.lookup_pair(state, mapping[state]) - model.offsets[x])
        return cls(model, tuple(choices))

    @classmethod
    def lowest_index(cls, model: FiniteMdpModel) -> 'DeterministicStrategy':
        """Selector choosing the first action everywhere."""
        return cls(model, (0,) * model.n_states)

    @classmethod
    def from_pairs(cls, model: FiniteMdpModel, pairs: Sequence[int]) -> 'DeterministicStrategy':
        """Selector from one chosen pair index per state."""
        return cls(model, tuple(int(p) - model.offsets[x] for x, p in enumerate(pairs)))

    def pair_indices(self) -> np.ndarray:
        """Index of the chosen pair of every state."""
        return self.model.offsets[:-1] + np.array(self.choices, dtype=int)

    def action_of(self, state: int) -> str:
        return self.model.actions[state][self.choices[state]]

    def as_mapping(self) -> Dict[str, str]:
        return {state: self.action_of(x) for x, state in enumerate(self.model.states)}

    def rebind(self, model: FiniteMdpModel) -> 'DeterministicStrategy':
        """Same selector over another model with identical states and actions."""
        self.model.require_same_shape(model, "Selector")
        return DeterministicStrategy(model, self.choices)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, DeterministicStrategy):
            return NotImplemented
        return self.choices == other.choices and self.model.same_shape(other.model)

    def __hash__(self) -> int:
        return hash(self.choices)

    def __repr__(self) -> str:
        return f"DeterministicStrategy({self.as_mapping()})"


def as_stationary(selector: DeterministicStrategy) -> StationaryStrategy:
    """
    Embed a selector as a Dirac stationary kernel.

    Example:
        >>> sigma = as_stationary(DeterministicStrategy.lowest_index(model))
        >>> sigma.is_deterministic()
        True
    """
    weights = np.zeros(selector.model.n_pairs)
    weights[selector.pair_indices()] = 1.0
    return StationaryStrategy(selector.model, weights)


@dataclass(frozen=True, eq=False)
class MarkovStrategy:
    """Eventually stationary Markov strategy: head kernels for steps 1..H, then tail."""
    head: Tuple[StationaryStrategy, ...]
    tail: StationaryStrategy

    def __post_init__(self):
        head = tuple(self.head)
        for kernel in head:
            self.tail.model.require_same_shape(kernel.model, "Markov head kernel")
        object.__setattr__(self, 'head', head)

    @property
    def model(self) -> FiniteMdpModel:
        return self.tail.model

    @property
    def horizon(self) -> int:
        return len(self.head)

    def kernel_at(self, step: int) -> StationaryStrategy:
        """Kernel applied at decision step n (n >= 1)."""
        if step < 1:
            raise ValueError(f"Decision steps start at 1, got {step}")
        return self.head[step - 1] if step <= len(self.head) else self.tail

    @classmethod
    def stationary(cls, strategy: StationaryStrategy) -> 'MarkovStrategy':
        return cls((), strategy)


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    """Mixture: draw component l with probability weight_l, then follow phi_l forever."""
    components: Tuple[Tuple[float, DeterministicStrategy], ...]

    def __post_init__(self):
        components = tuple((float(w), s) for w, s in self.components)
        if not components:
            raise InvalidStrategy("Mixture has no components")
        model = components[0][1].model
        for weight, selector in components:
            model.require_same_shape(selector.model, "Mixture component")
            if not np.isfinite(weight) or weight < 0.0:
                raise InvalidStrategy(f"Mixture weight must be finite and nonnegative, got {weight!r}")
        total = sum(w for w, _ in components)
        if abs(total - 1.0) > MIXTURE_WEIGHT_TOLERANCE:
            raise InvalidStrategy(f"Mixture weights sum to {total!r}")
        object.__setattr__(self, 'components', components)

    @property
    def model(self) -> FiniteMdpModel:
        return self.components[0][1].model

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    @property
    def selectors(self) -> Tuple[DeterministicStrategy, ...]:
        return tuple(s for _, s in self.components)

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[Tuple[float, DeterministicStrategy]]:
        return iter(self.components)

    @classmethod
    def normalized(cls, components: Sequence[Tuple[float, DeterministicStrategy]]) -> 'MixedStrategy':
        """Mixture with weights rescaled to sum to exactly 1 (up to rounding)."""
        total = float(sum(w for w, _ in components))
        if total <= 0.0:
            raise InvalidStrategy("Mixture weights must have a positive sum")
        return cls(tuple((w / total, s) for w, s in components))

    def rebind(self, model: FiniteMdpModel) -> 'MixedStrategy':
        return MixedStrategy(tuple((w, s.rebind(model)) for w, s in self.components))
