"""
Extreme points and mixtures of deterministic stationary strategies.

This module provides:
- is_extreme: Dirac test of the induced strategy on the support of a measure
- enumerate_deterministic: brute-force walk over all selectors
- solve_unconstrained: value iteration for a weighted single cost
- MixtureDecomposer / decompose_to_mixture: an optimal occupation measure
  rewritten as a mixture of at most J+1 deterministic strategies
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from core.graph_analysis import almost_sure_absorbing
from core.model import ConstrainedProblem, FiniteMdpModel
from core.strategies import DeterministicStrategy, MixedStrategy, as_stationary
from utils.config import Tolerances, DEFAULT_TOLERANCES
from utils.constants import (
    SELECTOR_ENUMERATION_GUARD,
    SMALL_INSTANCE_SELECTORS,
    SUPPORT_POOL_LIMIT,
    LAGRANGIAN_GRID_POINTS,
    VALUE_ITERATION_MAX_SWEEPS,
    LP_ZERO_CHOP,
    DEFAULT_WORKERS,
)
from utils.errors import (
    TooManySelectors,
    NonConvergent,
    EmptyCandidatePool,
    NumericalFailure,
)
from utils.logging_config import get_logger
from .occupancy import (
    ObjectiveVector,
    OccupationMeasure,
    FinitenessReport,
    classify_finiteness,
    occupation_of_stationary,
    cost_vector,
)
from .simplex import StandardFormLp, simplex_solve

logger = get_logger(__name__)

__all__ = [
    'ObjectiveVector',
    'ExtremalityVerdict',
    'SelectorEvaluation',
    'DecompositionResult',
    'MixtureDecomposer',
    'is_extreme',
    'enumerate_deterministic',
    'solve_unconstrained',
    'decompose_to_mixture',
]


class ExtremalityVerdict(NamedTuple):
    is_extreme: bool
    witness: Optional[str]


class SelectorEvaluation(NamedTuple):
    """One selector with its finiteness report and, when finite, its cost vector."""
    selector: DeterministicStrategy
    report: FinitenessReport
    objective: Optional[ObjectiveVector]


@dataclass(frozen=True)
class DecompositionResult:
    """
    Mixture reproducing an optimal occupation measure in objective space.

    Attributes:
        mixture: Weights over deterministic strategies
        achieved: Mixture objective vector sum_l alpha_l R(phi_l)
        cardinality: Number of components
        fallback_flag: Set when only a (J+2)-component certificate was found
        component_objectives: Objective vector of every component
        pool_size: Number of finite candidates offered to the weight LP
    """
    mixture: MixedStrategy
    achieved: ObjectiveVector
    cardinality: int
    fallback_flag: bool
    component_objectives: Tuple[ObjectiveVector, ...]
    pool_size: int


# ============================================================================
# EXTREMALITY AND ENUMERATION
# ============================================================================

def is_extreme(model: FiniteMdpModel, measure: OccupationMeasure,
               tol: Optional[float] = None) -> ExtremalityVerdict:
    """
    Test whether a finite occupation measure is extreme.

    It is extreme exactly when the induced kernel is a Dirac on every state
    carrying mass; the witness is the first state where it randomizes.

    Args:
        model: The model
        measure: Finite, flow-feasible measure
        tol: Tolerance for both "carries mass" and "is a Dirac"

    Returns:
        ExtremalityVerdict(is_extreme, witness state name or None)

    Example:
        >>> is_extreme(twoact, OccupationMeasure(twoact, [0.5, 0.5]))
        ExtremalityVerdict(is_extreme=False, witness='s0')
    """
    tol = DEFAULT_TOLERANCES.extreme if tol is None else tol
    model.require_same_shape(measure.model, "Occupation measure")
    mu = measure.marginal
    for x in range(model.n_states):
        if mu[x] <= tol:
            continue
        block = measure.values[model.offsets[x]:model.offsets[x + 1]]
        if block.max() / mu[x] < 1.0 - tol:
            return ExtremalityVerdict(False, model.states[x])
    return ExtremalityVerdict(True, None)


def count_selectors(model: FiniteMdpModel) -> int:
    return math.prod(len(acts) for acts in model.actions)


def evaluate_selector(model: FiniteMdpModel, selector: DeterministicStrategy,
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> SelectorEvaluation:
    """Finiteness report and, when finite, objective vector of one selector."""
    strategy = as_stationary(selector)
    report = classify_finiteness(model, strategy)
    if not report.is_finite:
        return SelectorEvaluation(selector, report, None)
    measure = occupation_of_stationary(model, strategy, tolerances)
    return SelectorEvaluation(selector, report, cost_vector(model, measure))


def enumerate_deterministic(model: FiniteMdpModel, guard: int = SELECTOR_ENUMERATION_GUARD,
                            tolerances: Tolerances = DEFAULT_TOLERANCES
                            ) -> Iterator[SelectorEvaluation]:
    """
    Walk over every selector in lexicographic choice order.

    Args:
        model: The model
        guard: Maximum number of selectors
        tolerances: Numerical tolerances

    Returns:
        Iterator of SelectorEvaluation

    Raises:
        TooManySelectors: If the model has more selectors than the guard
    """
    total = count_selectors(model)
    if total > guard:
        raise TooManySelectors(f"Model has {total} deterministic strategies (guard {guard})")
    logger.debug(f"Enumerating {total} deterministic strategies")

    def walk() -> Iterator[SelectorEvaluation]:
        for choices in itertools.product(*(range(len(acts)) for acts in model.actions)):
            yield evaluate_selector(model, DeterministicStrategy(model, choices), tolerances)

    return walk()


# ============================================================================
# UNCONSTRAINED SOLVES
# ============================================================================

def solve_unconstrained(model: FiniteMdpModel, weights: Sequence[float],
                        tolerances: Tolerances = DEFAULT_TOLERANCES,
                        max_sweeps: int = VALUE_ITERATION_MAX_SWEEPS) -> DeterministicStrategy:
    """
    Greedy selector for the weighted cost sum_j lambda_j r_j.

    Value iteration starts from v = 0 on the states that can be absorbed
    almost surely, using only pairs that keep them there; other states get
    their first action. Ties go to the lowest action index.

    Args:
        model: The model
        weights: Nonnegative weights, one per cost table
        tolerances: Value-iteration stopping tolerance
        max_sweeps: Sweep cap

    Returns:
        Greedy DeterministicStrategy

    Raises:
        ValueError: If the weights have the wrong length or a negative entry
        NonConvergent: If the sweep cap is reached

    Example:
        >>> solve_unconstrained(twoact, [1.0, 0.0]).as_mapping()
        {'s0': 'a'}
    """
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (model.n_costs,) or np.any(weights < 0.0):
        raise ValueError(f"Expected {model.n_costs} nonnegative weights, got {weights.tolist()}")

    cost = weights @ model.costs
    inside, usable = almost_sure_absorbing(model)
    q_mask = np.where(usable, 0.0, np.inf)
    starts = model.offsets[:-1]

    values = np.zeros(model.n_states)
    for sweep in range(1, max_sweeps + 1):
        q = cost + model.kernel @ values + q_mask
        updated = np.where(inside, np.minimum.reduceat(q, starts), 0.0)
        change = float(np.max(np.abs(updated - values), initial=0.0))
        values = updated
        if change <= tolerances.value_iteration:
            logger.debug(f"Value iteration converged after {sweep} sweeps")
            break
    else:
        raise NonConvergent(f"Value iteration did not converge in {max_sweeps} sweeps")

    q = cost + model.kernel @ values + q_mask
    choices = []
    for x in range(model.n_states):
        block = q[model.offsets[x]:model.offsets[x + 1]]
        if not inside[x]:
            choices.append(0)
            continue
        best = block.min()
        tie = max(tolerances.zero_marginal, tolerances.zero_marginal * abs(best))
        choices.append(int(np.argmax(block <= best + tie)))
    return DeterministicStrategy(model, tuple(choices))


# ============================================================================
# MIXTURE DECOMPOSITION
# ============================================================================

def lagrangian_weights(n_costs: int, count: int = LAGRANGIAN_GRID_POINTS, skip: int = 0) -> List[np.ndarray]:
    """
    Deterministic weight vectors for Lagrangian candidates.

    With skip=0: every 0/1 vector, then `count` low-discrepancy points on the
    probability simplex. With skip > 0 only simplex points, continuing the
    sequence after `skip` points.
    """
    grid = []
    if skip == 0:
        grid = [np.array(bits, dtype=float) for bits in itertools.product((0.0, 1.0), repeat=n_costs)]
    if n_costs == 1:
        return grid or [np.ones(1)]
    sampler = qmc.Halton(d=n_costs, scramble=False)
    sampler.fast_forward(1 + skip)
    points = -np.log(sampler.random(count))
    grid.extend(points / points.sum(axis=1, keepdims=True))
    return grid


class MixtureDecomposer:
    """
    Rewrites an optimal occupation measure as a small mixture of deterministic
    stationary strategies with the same objective and feasible constraints.
    """

    def __init__(self, tolerances: Tolerances = DEFAULT_TOLERANCES, workers: int = DEFAULT_WORKERS):
        """
        Initialize the decomposer.

        Args:
            tolerances: Numerical tolerances
            workers: Threads used to generate Lagrangian candidates
        """
        self.tolerances = tolerances
        self.workers = max(1, int(workers))

    # -- candidate pool ------------------------------------------------

    def support_selectors(self, model: FiniteMdpModel, measure: OccupationMeasure,
                          limit: int = SUPPORT_POOL_LIMIT) -> List[DeterministicStrategy]:
        """Selectors using only actions with positive mass on the support (first `limit`)."""
        tol = self.tolerances.zero_marginal
        mu = measure.marginal
        options = []
        for x in range(model.n_states):
            block = measure.values[model.offsets[x]:model.offsets[x + 1]]
            used = [a for a, value in enumerate(block) if value > tol] if mu[x] > tol else []
            options.append(used or [0])
        total = math.prod(len(o) for o in options)
        if total > limit:
            logger.warning(f"Support admits {total} selectors; keeping the first {limit}")
        return [DeterministicStrategy(model, choices)
                for choices in itertools.islice(itertools.product(*options), limit)]

    def lagrangian_selectors(self, model: FiniteMdpModel,
                             weights: Sequence[np.ndarray]) -> List[DeterministicStrategy]:
        """Unconstrained optima for every weight vector, solved concurrently."""
        def solve(weight: np.ndarray) -> Optional[DeterministicStrategy]:
            try:
                return solve_unconstrained(model, weight, self.tolerances)
            except NonConvergent as e:
                logger.warning(f"Skipping Lagrangian weight {np.round(weight, 4).tolist()}: {e}")
                return None

        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            results = list(executor.map(solve, weights))
        return [s for s in results if s is not None]

    def _evaluate_pool(self, model: FiniteMdpModel,
                       selectors: Sequence[DeterministicStrategy],
                       known: Dict[Tuple[int, ...], Optional[ObjectiveVector]]) -> None:
        for selector in selectors:
            if selector.choices not in known:
                known[selector.choices] = evaluate_selector(model, selector, self.tolerances).objective

    @staticmethod
    def _finite_pool(known: Dict[Tuple[int, ...], Optional[ObjectiveVector]]
                     ) -> List[Tuple[Tuple[int, ...], ObjectiveVector]]:
        return sorted((c, v) for c, v in known.items() if v is not None)

    # -- weight LP -----------------------------------------------------

    def _weight_lp(self, objectives: np.ndarray, target: np.ndarray) -> Optional[np.ndarray]:
        """
        min sum alpha_l R_0(l) s.t. sum alpha = 1, sum alpha_l R_j(l) <= R_j* + tol for j = 0..J
        and sum alpha_l R_0(l) >= R_0* - tol.

        The objective is pinned to R_0* from both sides: a weight vector
        undercutting R_0* describes a different strategy than the measure.
        """
        n = objectives.shape[0]
        tol = self.tolerances.decomposition
        lp = StandardFormLp(
            objective=objectives[:, 0],
            a_eq=np.ones((1, n)),
            b_eq=np.ones(1),
            a_ub=np.vstack([objectives.T, -objectives[:, 0]]),
            b_ub=np.concatenate([target + tol, [tol - target[0]]]),
        )
        solution = simplex_solve(lp, self.tolerances)
        if not solution.is_optimal:
            return None
        if abs(solution.objective - target[0]) > tol:
            return None
        return solution.values

    def _caratheodory(self, objectives: np.ndarray, alpha: np.ndarray, limit: int) -> np.ndarray:
        """Shrink the support of alpha to at most `limit` points, keeping sum alpha (1, R)."""
        alpha = np.where(alpha > LP_ZERO_CHOP, alpha, 0.0)
        while True:
            support = np.nonzero(alpha > 0.0)[0]
            if len(support) <= limit:
                return alpha
            # Null direction of the lifted points (R_l, 1); it sums to zero
            lifted = np.vstack([objectives[support].T, np.ones(len(support))])
            direction = np.linalg.svd(lifted)[2][-1]
            if not np.any(direction > 0.0):
                direction = -direction
            positive = np.nonzero(direction > 0.0)[0]
            ratios = alpha[support[positive]] / direction[positive]
            leaving = positive[int(np.argmin(ratios))]
            reduced = alpha[support] - ratios.min() * direction
            reduced[leaving] = 0.0
            alpha[support] = np.where(reduced > LP_ZERO_CHOP, reduced, 0.0)

    def _subset_search(self, objectives: np.ndarray, support: np.ndarray, target: np.ndarray,
                       max_size: int) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        for size in range(1, max_size + 1):
            for subset in itertools.combinations(support.tolist(), size):
                rows = np.array(subset)
                alpha = self._weight_lp(objectives[rows], target)
                if alpha is not None:
                    return rows, alpha
        return None

    def _certificate(self, objectives: np.ndarray, target: np.ndarray,
                     n_costs: int) -> Optional[Tuple[np.ndarray, np.ndarray, bool]]:
        alpha = self._weight_lp(objectives, target)
        if alpha is None:
            return None
        alpha = self._caratheodory(objectives, alpha, n_costs + 1)
        support = np.nonzero(alpha > 0.0)[0]
        if len(support) <= n_costs:
            return support, alpha[support], False
        found = self._subset_search(objectives, support, target, n_costs)
        if found is not None:
            rows, weights = found
            keep = weights > 0.0
            return rows[keep], weights[keep], False
        return support, alpha[support], True

    # -- entry point ---------------------------------------------------

    def decompose(self, problem: ConstrainedProblem, measure: OccupationMeasure) -> DecompositionResult:
        """
        Decompose a repaired optimal occupation measure into a mixture.

        Args:
            problem: The constrained problem
            measure: Finite, flow-feasible, repaired optimum

        Returns:
            DecompositionResult

        Raises:
            EmptyCandidatePool: If no candidate selector has a finite occupation
            NumericalFailure: If no mixture of candidates matches the target
        """
        model = problem.model
        model.require_same_shape(measure.model, "Occupation measure")
        target_vector = cost_vector(model, measure)
        target = target_vector.as_array()
        n_costs = model.n_costs

        verdict = is_extreme(model, measure, self.tolerances.extreme)
        if verdict.is_extreme:
            choices = tuple(
                int(np.argmax(measure.values[model.offsets[x]:model.offsets[x + 1]]))
                for x in range(model.n_states)
            )
            selector = DeterministicStrategy(model, choices)
            evaluation = evaluate_selector(model, selector, self.tolerances)
            if evaluation.objective is not None and np.all(
                    np.abs(evaluation.objective.as_array() - target) <= self.tolerances.decomposition):
                logger.info("Optimum is extreme; returning its deterministic strategy")
                return DecompositionResult(
                    MixedStrategy(((1.0, selector),)), evaluation.objective, 1, False,
                    (evaluation.objective,), 1,
                )

        known: Dict[Tuple[int, ...], Optional[ObjectiveVector]] = {}
        self._evaluate_pool(model, self.support_selectors(model, measure), known)
        self._evaluate_pool(model, self.lagrangian_selectors(model, lagrangian_weights(n_costs)), known)
        if count_selectors(model) <= SMALL_INSTANCE_SELECTORS:
            for evaluation in enumerate_deterministic(model, tolerances=self.tolerances):
                known.setdefault(evaluation.selector.choices, evaluation.objective)

        pool = self._finite_pool(known)
        if not pool:
            raise EmptyCandidatePool("No deterministic strategy with finite occupation was found")

        certificate = self._certificate(np.array([v.values for _, v in pool]), target, n_costs)
        if certificate is None or certificate[2]:
            logger.warning("Enlarging the candidate pool with perturbed Lagrangian weights")
            extra = lagrangian_weights(n_costs, count=LAGRANGIAN_GRID_POINTS * n_costs,
                                       skip=LAGRANGIAN_GRID_POINTS)
            self._evaluate_pool(model, self.lagrangian_selectors(model, extra), known)
            pool = self._finite_pool(known)
            retry = self._certificate(np.array([v.values for _, v in pool]), target, n_costs)
            if retry is not None and (certificate is None or not retry[2]):
                certificate = retry

        if certificate is None:
            raise NumericalFailure("No mixture of candidate strategies reproduces the optimum")

        rows, weights, fallback = certificate
        if fallback:
            logger.warning(f"Only a {len(rows)}-component mixture was certified (J+2 fallback)")

        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
        components = tuple(
            (float(w), DeterministicStrategy(model, pool[r][0])) for r, w in zip(rows, weights)
        )
        objectives = tuple(pool[r][1] for r in rows)
        achieved = ObjectiveVector(tuple(
            float(sum(w * v.values[j] for w, v in zip(weights, objectives))) for j in range(n_costs)
        ))
        logger.info(f"Decomposed optimum into {len(components)} deterministic strategies "
                    f"(pool of {len(pool)})")
        return DecompositionResult(
            MixedStrategy.normalized(components), achieved, len(components), fallback,
            objectives, len(pool),
        )


def decompose_to_mixture(problem: ConstrainedProblem, measure: OccupationMeasure,
                         tolerances: Tolerances = DEFAULT_TOLERANCES,
                         workers: int = DEFAULT_WORKERS) -> DecompositionResult:
    """Decompose a repaired optimum; see MixtureDecomposer.decompose."""
    return MixtureDecomposer(tolerances, workers).decompose(problem, measure)
