"""
Occupation measures of stationary, Markov and mixed strategies.

This module provides:
- Exact finiteness classification of stationary strategies (graph based)
- Occupation measures by dense LU solves on the reachable states
- Flow-balance residuals, induced strategies and minimality repair
- The value equation v = f + P v and its truncated-sum counterpart
- Step-wise marginals and markovization of mixtures
- Cost vectors (R_0, ..., R_J) of occupation measures
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from core.graph_analysis import trapped_states, closed_class_witness
from core.model import FiniteMdpModel
from core.strategies import (
    StationaryStrategy,
    DeterministicStrategy,
    MarkovStrategy,
    MixedStrategy,
    as_stationary,
)
from utils.config import Tolerances, DEFAULT_TOLERANCES
from utils.constants import FINITENESS_REPORT_HORIZON, NEGATIVE_CLAMP_TOLERANCE
from utils.errors import (
    ModelValidationError,
    InfiniteOccupation,
    SingularSystem,
    RepairFailed,
    ShapeMismatch,
)
from utils.logging_config import get_logger

logger = get_logger(__name__)


# ============================================================================
# RESULT TYPES
# ============================================================================

class FinitenessVerdict(Enum):
    FINITE = "finite"
    INFINITE = "infinite"


@dataclass(frozen=True)
class FinitenessReport:
    """
    Finiteness verdict of a stationary strategy.

    Attributes:
        verdict: FINITE or INFINITE
        reachable: States reachable from the initial support, in model order
        witness: For INFINITE, a reachable closed class that never leaks
        tail_mass: For FINITE, survival probabilities P(X_n in X) for n = 1..horizon
    """
    verdict: FinitenessVerdict
    reachable: Tuple[str, ...]
    witness: Optional[Tuple[str, ...]] = None
    tail_mass: Optional[Tuple[float, ...]] = None

    @property
    def is_finite(self) -> bool:
        return self.verdict is FinitenessVerdict.FINITE

    def describe(self) -> str:
        if self.is_finite:
            return f"finite ({len(self.reachable)} reachable states)"
        return f"infinite (closed class {{{', '.join(self.witness)}}})"


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    """Nonnegative table M[x][a], stored per pair in model order."""
    model: FiniteMdpModel
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.model.n_pairs,):
            raise ShapeMismatch(f"Occupation needs {self.model.n_pairs} entries, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ModelValidationError("Occupation entries must be finite")
        if np.any(values < -NEGATIVE_CLAMP_TOLERANCE):
            p = int(np.argmin(values))
            raise ModelValidationError(
                f"Negative occupation entry at {self.model.pair_labels[p]}: {values[p]!r}"
            )
        values = np.maximum(values, 0.0)
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    @property
    def marginal(self) -> np.ndarray:
        """State marginal mu(x) = sum_a M[x][a]."""
        return self.model.incidence @ self.values

    @property
    def total_mass(self) -> float:
        """Expected number of decisions before absorption."""
        return float(self.values.sum())

    def entry(self, state: str, action: str) -> float:
        return float(self.values[self.model.lookup_pair(state, action)])

    def as_table(self) -> Dict[str, Dict[str, float]]:
        table: Dict[str, Dict[str, float]] = {}
        for (state, action), value in zip(self.model.pair_labels, self.values):
            table.setdefault(state, {})[action] = float(value)
        return table

    def distance(self, other: 'OccupationMeasure') -> float:
        """Sup-norm distance to another measure over the same model."""
        self.model.require_same_shape(other.model, "Occupation measure")
        return float(np.max(np.abs(self.values - other.values), initial=0.0))

    def rebind(self, model: FiniteMdpModel) -> 'OccupationMeasure':
        self.model.require_same_shape(model, "Occupation measure")
        return OccupationMeasure(model, self.values)

    @classmethod
    def combination(cls, terms: Sequence[Tuple[float, 'OccupationMeasure']]) -> 'OccupationMeasure':
        """Weighted sum of measures over the same model."""
        model = terms[0][1].model
        values = np.zeros(model.n_pairs)
        for weight, measure in terms:
            model.require_same_shape(measure.model, "Occupation measure")
            values = values + weight * measure.values
        return cls(model, values)


@dataclass(frozen=True)
class ObjectiveVector:
    """Cost integrals (R_0, ..., R_J) of an occupation measure."""
    values: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'values', tuple(float(v) for v in self.values))

    @property
    def objective(self) -> float:
        return self.values[0]

    @property
    def constraints(self) -> Tuple[float, ...]:
        return self.values[1:]

    def satisfies(self, bounds: Sequence[float], tol: float = 0.0) -> bool:
        """True when R_j <= d_j + tol for every constraint."""
        return all(r <= d + tol for r, d in zip(self.constraints, bounds))

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def as_dict(self, names: Sequence[str]) -> Dict[str, float]:
        return dict(zip(names, self.values))

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, index: int) -> float:
        return self.values[index]

    def __add__(self, other: 'ObjectiveVector') -> 'ObjectiveVector':
        if len(other) != len(self):
            raise ShapeMismatch("Objective vectors differ in length")
        return ObjectiveVector(tuple(a + b for a, b in zip(self.values, other.values)))

    def __mul__(self, factor: float) -> 'ObjectiveVector':
        return ObjectiveVector(tuple(factor * v for v in self.values))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class ValueFunction:
    """Solution v of v = f + P_sigma v; v(cemetery) = 0 is implicit."""
    model: FiniteMdpModel
    values: np.ndarray

    def at(self, state: str) -> float:
        return float(self.values[self.model.state_index[state]])

    def residual(self, strategy: StationaryStrategy, f: np.ndarray,
                 states: Optional[Sequence[int]] = None) -> float:
        """Sup-norm residual of v - f - P v over the given states (default: all)."""
        gap = self.values - np.asarray(f, dtype=float) - strategy.transition_matrix() @ self.values
        if states is not None:
            gap = gap[list(states)]
        return float(np.max(np.abs(gap), initial=0.0))


# ============================================================================
# FINITENESS
# ============================================================================

def survival_probabilities(model: FiniteMdpModel, strategy: StationaryStrategy,
                           horizon: int, distribution: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Probabilities P(X_n in X) of not yet being absorbed, for n = 1..horizon.

    Args:
        model: The model
        strategy: Stationary strategy
        horizon: Number of steps
        distribution: Initial distribution (default: Dirac at the initial state)

    Returns:
        Array of length horizon
    """
    nu = model.initial_distribution() if distribution is None else np.asarray(distribution, dtype=float)
    transition = strategy.transition_matrix()
    survival = np.empty(horizon)
    for n in range(horizon):
        nu = nu @ transition
        survival[n] = nu.sum()
    return survival


def _classify_from(model: FiniteMdpModel, strategy: StationaryStrategy,
                   sources: Sequence[int], horizon: int,
                   distribution: np.ndarray) -> Tuple[FinitenessReport, Sequence[int]]:
    mask = strategy.support()
    reachable, trapped = trapped_states(model, mask, sources)
    reachable_sorted = sorted(reachable)
    names = tuple(model.states[x] for x in reachable_sorted)
    if trapped:
        witness = closed_class_witness(model, mask, trapped)
        report = FinitenessReport(
            FinitenessVerdict.INFINITE, names,
            witness=tuple(model.states[x] for x in sorted(witness)),
        )
    else:
        tail = survival_probabilities(model, strategy, horizon, distribution)
        report = FinitenessReport(FinitenessVerdict.FINITE, names, tail_mass=tuple(tail.tolist()))
    return report, reachable_sorted


def classify_finiteness(model: FiniteMdpModel, strategy: StationaryStrategy,
                        horizon: int = FINITENESS_REPORT_HORIZON) -> FinitenessReport:
    """
    Decide whether a stationary strategy has a finite occupation measure.

    The verdict is FINITE exactly when every state reachable from the initial
    state under the strategy can reach the cemetery in the support graph.

    Args:
        model: The model
        strategy: Stationary strategy over the model
        horizon: Number of survival probabilities reported for FINITE

    Returns:
        FinitenessReport

    Example:
        >>> classify_finiteness(loop, StationaryStrategy.uniform(loop)).witness
        ('s0',)
    """
    model.require_same_shape(strategy.model, "Strategy")
    report, _ = _classify_from(model, strategy, [model.initial], horizon,
                               model.initial_distribution())
    logger.debug(f"Finiteness: {report.describe()}")
    return report


# ============================================================================
# OCCUPATION MEASURES
# ============================================================================

def _solve_restricted(matrix: np.ndarray, rhs: np.ndarray, tolerances: Tolerances,
                      transpose: bool) -> np.ndarray:
    """Solve (I - P) z = rhs (or its transpose) by LU with partial pivoting."""
    system = np.eye(matrix.shape[0]) - matrix
    lu, piv = lu_factor(system, check_finite=False)
    smallest = float(np.min(np.abs(np.diag(lu)), initial=np.inf))
    if smallest <= tolerances.singular:
        raise SingularSystem(
            f"Balance system is singular (smallest pivot {smallest:.3e}) although "
            f"the graph analysis found the strategy absorbing"
        )
    return lu_solve((lu, piv), rhs, trans=1 if transpose else 0, check_finite=False)


def occupation_from_distribution(model: FiniteMdpModel, strategy: StationaryStrategy,
                                 distribution: np.ndarray,
                                 tolerances: Tolerances = DEFAULT_TOLERANCES
                                 ) -> Union[OccupationMeasure, FinitenessReport]:
    """
    Occupation measure of a stationary strategy started from a distribution.

    The distribution may be a sub-probability vector (mass already absorbed).

    Returns:
        OccupationMeasure, or the INFINITE FinitenessReport

    Raises:
        SingularSystem: If the linear system disagrees with the graph verdict
    """
    model.require_same_shape(strategy.model, "Strategy")
    nu = np.asarray(distribution, dtype=float)
    if nu.shape != (model.n_states,):
        raise ShapeMismatch(f"Distribution needs {model.n_states} entries, got {nu.shape}")
    sources = np.nonzero(nu > 0.0)[0].tolist()
    if not sources:
        return OccupationMeasure(model, np.zeros(model.n_pairs))

    report, reachable = _classify_from(model, strategy, sources, 0, nu)
    if not report.is_finite:
        return report

    transition = strategy.transition_matrix()[np.ix_(reachable, reachable)]
    mu_reachable = _solve_restricted(transition, nu[reachable], tolerances, transpose=True)
    mu = np.zeros(model.n_states)
    mu[reachable] = np.maximum(mu_reachable, 0.0)
    return OccupationMeasure(model, strategy.weights * mu[model.pair_state])


def occupation_of_stationary(model: FiniteMdpModel, strategy: StationaryStrategy,
                             tolerances: Tolerances = DEFAULT_TOLERANCES
                             ) -> Union[OccupationMeasure, FinitenessReport]:
    """
    Occupation measure of a stationary strategy from the initial state.

    Solves mu = delta_x0 + P^T mu on the reachable states, sets mu = 0
    elsewhere, and splits M[x][a] = sigma(a|x) mu(x).

    Args:
        model: The model
        strategy: Stationary strategy
        tolerances: Numerical tolerances (singular pivot threshold)

    Returns:
        OccupationMeasure when finite, else the INFINITE FinitenessReport

    Raises:
        SingularSystem: If the linear system disagrees with the graph verdict

    Example:
        >>> m = occupation_of_stationary(geometric, StationaryStrategy.uniform(geometric))
        >>> m.entry("s0", "a")
        2.0
    """
    return occupation_from_distribution(model, strategy, model.initial_distribution(), tolerances)


def flow_residual(model: FiniteMdpModel, measure: OccupationMeasure,
                  distribution: Optional[np.ndarray] = None) -> float:
    """
    Largest violation of mu(x) = delta_x0(x) + sum_{y,a} p(x|y,a) M[y][a].

    Args:
        model: The model
        measure: Nonnegative table over the model
        distribution: Initial distribution (default: Dirac at the initial state)

    Returns:
        Sup-norm residual of the balance equations
    """
    model.require_same_shape(measure.model, "Occupation measure")
    nu = model.initial_distribution() if distribution is None else np.asarray(distribution, dtype=float)
    inflow = model.kernel.T @ measure.values
    return float(np.max(np.abs(measure.marginal - nu - inflow)))


def induced_strategy(model: FiniteMdpModel, measure: OccupationMeasure,
                     default: Optional[DeterministicStrategy] = None,
                     tolerances: Tolerances = DEFAULT_TOLERANCES) -> StationaryStrategy:
    """
    Disintegrate a measure over its state marginal.

    sigma(a|x) = M[x][a] / mu(x) where mu(x) exceeds the zero-marginal
    tolerance; a Dirac at default(x) elsewhere (default: first action).
    """
    model.require_same_shape(measure.model, "Occupation measure")
    if default is None:
        default = DeterministicStrategy.lowest_index(model)
    mu = measure.marginal
    positive = mu > tolerances.zero_marginal
    mu_pairs = mu[model.pair_state]
    weights = np.where(positive[model.pair_state],
                       measure.values / np.where(mu_pairs > 0.0, mu_pairs, 1.0), 0.0)
    for x in np.nonzero(~positive)[0]:
        weights[model.offsets[x] + default.choices[x]] = 1.0
    # Renormalize rows so that rounding never breaks the row-sum invariant
    row_sums = model.incidence @ weights
    weights = weights / row_sums[model.pair_state]
    return StationaryStrategy(model, weights)


def minimality_repair(model: FiniteMdpModel, measure: OccupationMeasure,
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> OccupationMeasure:
    """
    Replace a flow-feasible table by the occupation of its induced strategy.

    The result is componentwise no larger than the input (up to tolerance),
    satisfies flow balance, and has no larger cost integrals. Excess mass on
    zero-leak classes not reachable from the initial state is removed.

    Raises:
        ModelValidationError: If the table is not flow-feasible
        RepairFailed: If the induced strategy has an infinite occupation
    """
    residual = flow_residual(model, measure)
    if residual > tolerances.flow_residual:
        raise ModelValidationError(f"Table is not flow-feasible (residual {residual:.3e})")

    strategy = induced_strategy(model, measure, tolerances=tolerances)
    repaired = occupation_of_stationary(model, strategy, tolerances)
    if isinstance(repaired, FinitenessReport):
        raise RepairFailed(f"Induced strategy is not absorbing: {repaired.describe()}")

    removed = measure.total_mass - repaired.total_mass
    if removed > tolerances.flow_residual:
        logger.info(f"Minimality repair removed {removed:.6g} units of excess occupation")
    return repaired


def cost_vector(model: FiniteMdpModel, measure: OccupationMeasure) -> ObjectiveVector:
    """R_j = sum_{x,a} r_j(x,a) M[x][a] for j = 0..J."""
    model.require_same_shape(measure.model, "Occupation measure")
    return ObjectiveVector(tuple((model.costs @ measure.values).tolist()))


# ============================================================================
# VALUE EQUATION
# ============================================================================

def evaluate_value(model: FiniteMdpModel, strategy: StationaryStrategy, f: Sequence[float],
                   tolerances: Tolerances = DEFAULT_TOLERANCES) -> ValueFunction:
    """
    Solve v = f + P_sigma v on the states reachable from the initial state.

    Args:
        model: The model
        strategy: Absorbing stationary strategy
        f: Per-state finite values (f at the cemetery is 0)
        tolerances: Numerical tolerances

    Returns:
        ValueFunction, zero off the reachable set

    Raises:
        InfiniteOccupation: If the strategy is not absorbing from the initial state

    Example:
        >>> evaluate_value(chain2, sigma, [1.0, 3.0]).at("s0")
        4.0
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (model.n_states,):
        raise ShapeMismatch(f"Value source needs {model.n_states} entries, got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ModelValidationError("Value source must be finite")

    report = classify_finiteness(model, strategy)
    if not report.is_finite:
        raise InfiniteOccupation(f"Strategy is not absorbing: {report.describe()}", report=report)

    reachable = [model.state_index[s] for s in report.reachable]
    transition = strategy.transition_matrix()[np.ix_(reachable, reachable)]
    values = np.zeros(model.n_states)
    values[reachable] = _solve_restricted(transition, f[reachable], tolerances, transpose=False)
    return ValueFunction(model, values)


def truncated_value(model: FiniteMdpModel, strategy: StationaryStrategy, f: Sequence[float],
                    horizon: int) -> np.ndarray:
    """Partial sums sum_{n < horizon} (P_sigma^n f)(x) for every state."""
    transition = strategy.transition_matrix()
    term = np.asarray(f, dtype=float)
    total = np.zeros(model.n_states)
    for _ in range(horizon):
        total = total + term
        term = transition @ term
    return total


# ============================================================================
# MARKOV STRATEGIES AND MIXTURES
# ============================================================================

def occupation_of_markov(model: FiniteMdpModel, strategy: MarkovStrategy,
                         tolerances: Tolerances = DEFAULT_TOLERANCES
                         ) -> Union[OccupationMeasure, FinitenessReport]:
    """
    Exact occupation measure of an eventually stationary Markov strategy.

    The head is handled by the forward marginal recursion; the stationary
    tail in closed form from the state distribution reached after the head.

    Returns:
        OccupationMeasure, or the INFINITE FinitenessReport of the tail
    """
    model.require_same_shape(strategy.model, "Markov strategy")
    nu = model.initial_distribution()
    head_values = np.zeros(model.n_pairs)
    for kernel in strategy.head:
        flow = kernel.weights * nu[model.pair_state]
        head_values = head_values + flow
        nu = flow @ model.kernel

    tail = occupation_from_distribution(model, strategy.tail, nu, tolerances)
    if isinstance(tail, FinitenessReport):
        return tail
    if not strategy.head:
        return tail
    return OccupationMeasure(model, head_values + tail.values)


def occupation_of_mixture(model: FiniteMdpModel, mixture: MixedStrategy,
                          tolerances: Tolerances = DEFAULT_TOLERANCES
                          ) -> Union[OccupationMeasure, FinitenessReport]:
    """
    Occupation measure sum_l alpha_l M^{phi_l} of a mixture.

    Returns:
        OccupationMeasure, or the report of the first component with positive
        weight whose occupation is infinite
    """
    model.require_same_shape(mixture.model, "Mixture")
    terms = []
    for alpha, selector in mixture:
        measure = occupation_of_stationary(model, as_stationary(selector), tolerances)
        if isinstance(measure, FinitenessReport):
            if alpha > 0.0:
                return measure
            continue
        terms.append((alpha, measure))
    if not terms:
        return OccupationMeasure(model, np.zeros(model.n_pairs))
    return OccupationMeasure.combination(terms)


def occupation_of(model: FiniteMdpModel,
                  strategy: Union[DeterministicStrategy, StationaryStrategy, MarkovStrategy, MixedStrategy],
                  tolerances: Tolerances = DEFAULT_TOLERANCES
                  ) -> Union[OccupationMeasure, FinitenessReport]:
    """Occupation measure of any supported strategy class."""
    if isinstance(strategy, DeterministicStrategy):
        return occupation_of_stationary(model, as_stationary(strategy), tolerances)
    if isinstance(strategy, StationaryStrategy):
        return occupation_of_stationary(model, strategy, tolerances)
    if isinstance(strategy, MarkovStrategy):
        return occupation_of_markov(model, strategy, tolerances)
    if isinstance(strategy, MixedStrategy):
        return occupation_of_mixture(model, strategy, tolerances)
    raise TypeError(f"Unsupported strategy type: {type(strategy).__name__}")


def step_marginals(model: FiniteMdpModel, strategy: MarkovStrategy, steps: int) -> np.ndarray:
    """
    Row n-1 holds P(X_{n-1} = x, A_n = a) for decision steps n = 1..steps.
    """
    model.require_same_shape(strategy.model, "Markov strategy")
    nu = model.initial_distribution()
    marginals = np.zeros((steps, model.n_pairs))
    for n in range(1, steps + 1):
        flow = strategy.kernel_at(n).weights * nu[model.pair_state]
        marginals[n - 1] = flow
        nu = flow @ model.kernel
    return marginals


def _selector_state_paths(model: FiniteMdpModel, mixture: MixedStrategy, steps: int) -> np.ndarray:
    """w[l, n, x] = P^{phi_l}(X_n = x) for n = 0..steps."""
    paths = np.zeros((len(mixture), steps + 1, model.n_states))
    for l, selector in enumerate(mixture.selectors):
        transition = as_stationary(selector).transition_matrix()
        nu = model.initial_distribution()
        for n in range(steps + 1):
            paths[l, n] = nu
            nu = nu @ transition
    return paths


def mixture_step_marginals(model: FiniteMdpModel, mixture: MixedStrategy, steps: int) -> np.ndarray:
    """Step-wise state-action marginals of a mixture (same layout as step_marginals)."""
    model.require_same_shape(mixture.model, "Mixture")
    paths = _selector_state_paths(model, mixture, steps)
    marginals = np.zeros((steps, model.n_pairs))
    for l, (alpha, selector) in enumerate(mixture):
        chosen = selector.pair_indices()
        for n in range(steps):
            marginals[n, chosen] += alpha * paths[l, n]
    return marginals


def markovize_mixture(model: FiniteMdpModel, mixture: MixedStrategy, horizon: int,
                      tail_rule: str = "residual",
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> MarkovStrategy:
    """
    Markov strategy with the same step-wise state-action marginals as a mixture.

    sigma_n(a|x) is the alpha-weighted share of components choosing a at x
    among those still at x at step n; rows nobody reaches get a Dirac at the
    first action.

    Args:
        model: The model
        mixture: Mixture of deterministic strategies with finite occupation
        horizon: Number of head kernels H (>= 1)
        tail_rule: "residual" uses the strategy induced by the mixture's
            occupation after step H, so the whole occupation measure is
            reproduced; "step" repeats the step-H kernel forever
        tolerances: Numerical tolerances

    Returns:
        MarkovStrategy with H head kernels

    Raises:
        ValueError: If horizon < 1 or tail_rule is unknown
        InfiniteOccupation: If a component is not absorbing
    """
    if horizon < 1:
        raise ValueError(f"Horizon must be at least 1, got {horizon}")
    if tail_rule not in ("residual", "step"):
        raise ValueError(f"Unknown tail rule '{tail_rule}'")
    model.require_same_shape(mixture.model, "Mixture")

    for selector in mixture.selectors:
        report = classify_finiteness(model, as_stationary(selector))
        if not report.is_finite:
            raise InfiniteOccupation(
                f"Mixture component {selector!r} is not absorbing: {report.describe()}",
                report=report,
            )

    paths = _selector_state_paths(model, mixture, horizon)
    fallback = np.zeros(model.n_pairs)
    fallback[model.offsets[:-1]] = 1.0

    head = []
    for n in range(horizon):
        numerator = np.zeros(model.n_pairs)
        for l, (alpha, selector) in enumerate(mixture):
            numerator[selector.pair_indices()] += alpha * paths[l, n]
        denominator = model.incidence @ numerator
        reached = denominator[model.pair_state] > 0.0
        weights = np.where(reached, numerator / np.where(reached, denominator[model.pair_state], 1.0),
                           fallback)
        row_sums = model.incidence @ weights
        head.append(StationaryStrategy(model, weights / row_sums[model.pair_state]))

    if tail_rule == "step":
        tail = head[-1]
    else:
        residual = np.zeros(model.n_pairs)
        for l, (alpha, selector) in enumerate(mixture):
            after = paths[l, horizon]
            component = occupation_from_distribution(model, as_stationary(selector), after, tolerances)
            residual = residual + alpha * component.values
        tail = induced_strategy(model, OccupationMeasure(model, residual), tolerances=tolerances)

    logger.debug(f"Markovized {len(mixture)}-component mixture over {horizon} steps ({tail_rule} tail)")
    return MarkovStrategy(tuple(head), tail)
