"""
End-to-end constrained solving.

Pipeline: penalization check, occupation LP, dense simplex, minimality
repair, mixture decomposition.
"""

from typing import NamedTuple

import numpy as np

from core.model import ConstrainedProblem
from utils.config import Tolerances, DEFAULT_TOLERANCES
from utils.constants import DEFAULT_WORKERS
from utils.errors import AssumptionViolated, InfeasibleProblem, NumericalFailure, RepairFailed
from utils.logging_config import get_logger
from .assumption_checker import check_penalization_assumption
from .decomposer import DecompositionResult, MixtureDecomposer, evaluate_selector
from .occupancy import ObjectiveVector, OccupationMeasure, minimality_repair, cost_vector
from .occupation_lp import build_occupation_lp
from .simplex import LpStatus, LpSolution, simplex_solve

logger = get_logger(__name__)


class ConstrainedSolution(NamedTuple):
    occupation: OccupationMeasure
    decomposition: DecompositionResult
    objective: ObjectiveVector


class FeasibilityResult(NamedTuple):
    occupation: OccupationMeasure
    decomposition: DecompositionResult


class ConstrainedSolver:
    """Solves constrained total-cost problems and decomposes their optima."""

    def __init__(self, tolerances: Tolerances = DEFAULT_TOLERANCES, workers: int = DEFAULT_WORKERS,
                 skip_assumption_check: bool = False):
        """
        Initialize the solver.

        Args:
            tolerances: Numerical tolerances
            workers: Threads for candidate generation
            skip_assumption_check: Take the LP solution at face value instead of
                refusing problems that violate the penalization assumption
        """
        self.tolerances = tolerances
        self.workers = workers
        self.skip_assumption_check = skip_assumption_check
        self.last_lp: LpSolution = None

    def solve(self, problem: ConstrainedProblem) -> ConstrainedSolution:
        """
        Minimize R_0 subject to R_j <= d_j.

        Args:
            problem: Constrained problem

        Returns:
            ConstrainedSolution(occupation, decomposition, objective)

        Raises:
            AssumptionViolated: If a reachable all-zero-cost end component exists
            InfeasibleProblem: If no strategy satisfies the constraints
        """
        model = problem.model
        if self.skip_assumption_check:
            logger.warning("Penalization check skipped; LP solution taken at face value")
        else:
            check = check_penalization_assumption(problem)
            if not check.holds:
                pairs = ", ".join(f"({s}, {a})" for s, a in sorted(check.witness))
                raise AssumptionViolated(
                    f"Reachable end component with all costs zero: {{{pairs}}}", witness=check.witness
                )

        lp = build_occupation_lp(problem)
        solution = simplex_solve(lp, self.tolerances)
        self.last_lp = solution
        if solution.status is LpStatus.INFEASIBLE:
            raise InfeasibleProblem("No strategy satisfies the constraints")
        if solution.status is LpStatus.UNBOUNDED:
            raise NumericalFailure("Occupation LP reported unbounded with nonnegative costs")

        raw = OccupationMeasure(model, np.maximum(solution.values, 0.0))
        try:
            occupation = minimality_repair(model, raw, self.tolerances)
        except RepairFailed:
            if not self.skip_assumption_check:
                raise
            logger.warning("Induced strategy is not absorbing; keeping the raw LP table")
            occupation = raw

        decomposition = MixtureDecomposer(self.tolerances, self.workers).decompose(problem, occupation)
        objective = cost_vector(model, occupation)
        logger.info(f"Optimal {problem.objective_name} = {objective.objective!r}")
        return ConstrainedSolution(occupation, decomposition, objective)

    def find_feasible(self, problem: ConstrainedProblem) -> FeasibilityResult:
        """
        Find a feasible point by minimizing R_1 subject to R_2..R_J.

        Args:
            problem: Problem with at least one constraint

        Returns:
            FeasibilityResult over the original problem's model

        Raises:
            InfeasibleProblem: If the smallest achievable R_1 exceeds d_1
        """
        reduced = problem.reindexed_for_feasibility()
        result = self.solve(reduced)
        achieved_r1 = result.decomposition.achieved.objective
        if achieved_r1 > problem.bounds[0] + self.tolerances.decomposition:
            raise InfeasibleProblem(
                f"Smallest achievable {problem.model.cost_names[1]} is {achieved_r1!r} "
                f"> bound {problem.bounds[0]!r}"
            )

        model = problem.model
        occupation = result.occupation.rebind(model)
        mixture = result.decomposition.mixture.rebind(model)
        components = tuple(
            evaluate_selector(model, selector, self.tolerances).objective for selector in mixture.selectors
        )
        achieved = ObjectiveVector(tuple(
            float(sum(w * c.values[j] for w, c in zip(mixture.weights, components)))
            for j in range(model.n_costs)
        ))
        decomposition = DecompositionResult(
            mixture, achieved, result.decomposition.cardinality,
            result.decomposition.fallback_flag, components, result.decomposition.pool_size,
        )
        logger.info(f"Feasible point found with {model.cost_names[1]} = {achieved_r1!r}")
        return FeasibilityResult(occupation, decomposition)


def solve_constrained(problem: ConstrainedProblem, tolerances: Tolerances = DEFAULT_TOLERANCES,
                      skip_assumption_check: bool = False,
                      workers: int = DEFAULT_WORKERS) -> ConstrainedSolution:
    """
    Solve a constrained problem end to end.

    Example:
        >>> solution = solve_constrained(twoact_problem)
        >>> solution.objective.objective
        0.5
    """
    return ConstrainedSolver(tolerances, workers, skip_assumption_check).solve(problem)


def find_feasible(problem: ConstrainedProblem, tolerances: Tolerances = DEFAULT_TOLERANCES,
                  workers: int = DEFAULT_WORKERS) -> FeasibilityResult:
    """Feasibility mode; see ConstrainedSolver.find_feasible."""
    return ConstrainedSolver(tolerances, workers).find_feasible(problem)
