"""
Dense two-phase tableau simplex.

This module provides:
- StandardFormLp: min c'x subject to A_eq x = b_eq, A_ub x <= b_ub, x >= 0
- LpSolution / LpStatus: solver result with basis and pivot count
- DenseSimplexSolver: Dantzig pricing with a switch to Bland's rule

Inequality rows get slack columns; rows whose right-hand side is negative are
negated, and rows without a usable slack get an artificial column for phase 1.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from utils.config import Tolerances, DEFAULT_TOLERANCES
from utils.constants import SIMPLEX_MAX_PIVOTS, BLAND_SWITCH_FACTOR, LP_ZERO_CHOP
from utils.errors import IterationLimit, ShapeMismatch
from utils.logging_config import get_logger

logger = get_logger(__name__)


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class StandardFormLp:
    """
    Linear program in the form min c'x, A_eq x = b_eq, A_ub x <= b_ub, x >= 0.

    Attributes:
        objective: (n,) cost coefficients
        a_eq: (m_eq, n) equality rows
        b_eq: (m_eq,) equality right-hand side
        a_ub: (m_ub, n) inequality rows
        b_ub: (m_ub,) inequality right-hand side
        column_labels: Optional label of every column
        row_labels: Optional labels of equality rows followed by inequality rows
    """
    objective: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray = None
    b_ub: np.ndarray = None
    column_labels: Tuple = ()
    row_labels: Tuple = ()

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        n = c.shape[0]
        a_eq = np.asarray(self.a_eq, dtype=float).reshape(-1, n)
        b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        a_ub = np.zeros((0, n)) if self.a_ub is None else np.asarray(self.a_ub, dtype=float).reshape(-1, n)
        b_ub = np.zeros(0) if self.b_ub is None else np.asarray(self.b_ub, dtype=float).reshape(-1)
        if a_eq.shape[0] != b_eq.shape[0] or a_ub.shape[0] != b_ub.shape[0]:
            raise ShapeMismatch("Constraint rows and right-hand sides differ in length")
        for name, value in (('objective', c), ('a_eq', a_eq), ('b_eq', b_eq), ('a_ub', a_ub), ('b_ub', b_ub)):
            object.__setattr__(self, name, value)

    @property
    def n_columns(self) -> int:
        return self.objective.shape[0]

    @property
    def n_equalities(self) -> int:
        return self.a_eq.shape[0]

    @property
    def n_inequalities(self) -> int:
        return self.a_ub.shape[0]


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Simplex result; values and objective are meaningful when OPTIMAL."""
    status: LpStatus
    values: Optional[np.ndarray] = None
    objective: Optional[float] = None
    basis: Tuple[int, ...] = ()
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass
class _Tableau:
    """Constraint rows, right-hand side and basis of the working tableau."""
    rows: np.ndarray
    rhs: np.ndarray
    basis: List[int]
    reduced: np.ndarray = field(default=None)
    value: float = 0.0

    def price(self, costs: np.ndarray) -> None:
        """Recompute reduced costs and objective value for a cost vector."""
        basic_costs = costs[self.basis]
        self.reduced = costs - basic_costs @ self.rows
        self.value = float(basic_costs @ self.rhs)

    def pivot(self, row: int, col: int) -> None:
        element = self.rows[row, col]
        self.rows[row] /= element
        self.rhs[row] /= element
        factors = self.rows[:, col].copy()
        factors[row] = 0.0
        self.rows -= np.outer(factors, self.rows[row])
        self.rhs -= factors * self.rhs[row]
        reduced_factor = self.reduced[col]
        self.reduced = self.reduced - reduced_factor * self.rows[row]
        self.value += reduced_factor * self.rhs[row]
        self.rows[:, col] = 0.0
        self.rows[row, col] = 1.0
        self.reduced[col] = 0.0
        self.basis[row] = col

    def drop_row(self, row: int) -> None:
        self.rows = np.delete(self.rows, row, axis=0)
        self.rhs = np.delete(self.rhs, row)
        del self.basis[row]


class DenseSimplexSolver:
    """
    Two-phase simplex on a dense tableau.

    Dantzig's most-negative reduced cost picks the entering column until a
    phase has made BLAND_SWITCH_FACTOR * (rows + columns) pivots; from then on
    Bland's lowest-index rule guarantees termination.
    """

    def __init__(self, tolerances: Tolerances = DEFAULT_TOLERANCES,
                 max_pivots: int = SIMPLEX_MAX_PIVOTS):
        """
        Initialize the solver.

        Args:
            tolerances: Pivot and feasibility tolerances
            max_pivots: Hard cap on pivots over both phases
        """
        self.tolerances = tolerances
        self.max_pivots = max_pivots
        self.pivots = 0

    def solve(self, lp: StandardFormLp) -> LpSolution:
        """
        Solve a linear program.

        Args:
            lp: Linear program in standard form

        Returns:
            LpSolution with status OPTIMAL, INFEASIBLE or UNBOUNDED

        Raises:
            IterationLimit: If the pivot cap is reached
        """
        self.pivots = 0
        n = lp.n_columns
        m_eq, m_ub = lp.n_equalities, lp.n_inequalities
        m = m_eq + m_ub

        # Equalities, then inequalities with one slack column each
        rows = np.zeros((m, n + m_ub))
        rows[:m_eq, :n] = lp.a_eq
        rows[m_eq:, :n] = lp.a_ub
        rows[m_eq:, n:] = np.eye(m_ub)
        rhs = np.concatenate([lp.b_eq, lp.b_ub])

        negative = rhs < 0.0
        rows[negative] *= -1.0
        rhs[negative] *= -1.0

        basis = []
        artificial_rows = []
        for i in range(m):
            if i >= m_eq and not negative[i]:
                basis.append(n + i - m_eq)
            else:
                artificial_rows.append(i)
                basis.append(None)

        n_structural = n + m_ub
        n_artificial = len(artificial_rows)
        full = np.zeros((m, n_structural + n_artificial))
        full[:, :n_structural] = rows
        for k, i in enumerate(artificial_rows):
            full[i, n_structural + k] = 1.0
            basis[i] = n_structural + k

        tableau = _Tableau(full, rhs.copy(), basis)

        # Phase 1: minimize the sum of artificials
        if n_artificial:
            phase1_costs = np.zeros(full.shape[1])
            phase1_costs[n_structural:] = 1.0
            tableau.price(phase1_costs)
            allowed = np.ones(full.shape[1], dtype=bool)
            status = self._run_phase(tableau, allowed, phase=1)
            if status is LpStatus.UNBOUNDED or tableau.value > self.tolerances.feasibility:
                logger.debug(f"Phase 1 ended with infeasibility {tableau.value:.3e}")
                return LpSolution(LpStatus.INFEASIBLE, iterations=self.pivots)
            self._expel_artificials(tableau, n_structural)

        # Phase 2 on the structural columns only
        tableau.rows = tableau.rows[:, :n_structural]
        costs = np.zeros(n_structural)
        costs[:n] = lp.objective
        tableau.price(costs)
        status = self._run_phase(tableau, np.ones(n_structural, dtype=bool), phase=2)
        if status is LpStatus.UNBOUNDED:
            return LpSolution(LpStatus.UNBOUNDED, iterations=self.pivots)

        solution = np.zeros(n_structural)
        solution[tableau.basis] = tableau.rhs
        values = solution[:n]
        values[np.abs(values) < LP_ZERO_CHOP] = 0.0
        objective = float(lp.objective @ values)
        logger.debug(f"LP solved: objective {objective!r} after {self.pivots} pivots")
        return LpSolution(
            LpStatus.OPTIMAL,
            values=values,
            objective=objective,
            basis=tuple(sorted(int(b) for b in tableau.basis)),
            iterations=self.pivots,
        )

    def _run_phase(self, tableau: _Tableau, allowed: np.ndarray, phase: int) -> LpStatus:
        pivot_tol = self.tolerances.pivot
        m, width = tableau.rows.shape
        bland_after = BLAND_SWITCH_FACTOR * (m + width)
        phase_pivots = 0

        while True:
            candidates = allowed & (tableau.reduced < -pivot_tol)
            if not np.any(candidates):
                return LpStatus.OPTIMAL

            bland = phase_pivots >= bland_after
            if bland:
                col = int(np.argmax(candidates))
            else:
                col = int(np.argmin(np.where(candidates, tableau.reduced, np.inf)))

            column = tableau.rows[:, col]
            eligible = column > pivot_tol
            if not np.any(eligible):
                return LpStatus.UNBOUNDED
            ratios = np.full(m, np.inf)
            ratios[eligible] = np.maximum(tableau.rhs[eligible], 0.0) / column[eligible]
            best = ratios.min()
            ties = np.nonzero(ratios <= best + 1e-12 * max(1.0, best))[0]
            row = int(min(ties, key=lambda i: tableau.basis[i]))

            tableau.pivot(row, col)
            phase_pivots += 1
            self.pivots += 1
            if self.pivots >= self.max_pivots:
                raise IterationLimit(f"Simplex reached {self.max_pivots} pivots in phase {phase}")
            if bland and phase_pivots == bland_after + 1:
                logger.debug(f"Phase {phase}: switched to Bland's rule")

    def _expel_artificials(self, tableau: _Tableau, n_structural: int) -> None:
        """Pivot artificials out of the basis; drop rows that are redundant."""
        row = 0
        while row < len(tableau.basis):
            if tableau.basis[row] < n_structural:
                row += 1
                continue
            entries = np.abs(tableau.rows[row, :n_structural])
            if entries.size and entries.max() > self.tolerances.pivot:
                col = int(np.argmax(entries > self.tolerances.pivot))
                tableau.pivot(row, col)
                row += 1
            else:
                logger.debug("Dropping redundant constraint row")
                tableau.drop_row(row)


def simplex_solve(lp: StandardFormLp, tolerances: Tolerances = DEFAULT_TOLERANCES) -> LpSolution:
    """
    Solve a linear program with the dense two-phase simplex.

    Example:
        >>> lp = StandardFormLp([1.0], np.zeros((0, 1)), [], a_ub=[[-1.0]], b_ub=[-1.0])
        >>> simplex_solve(lp).objective
        1.0
    """
    solution = DenseSimplexSolver(tolerances).solve(lp)
    logger.info(f"LP {solution.status.value} after {solution.iterations} pivots")
    return solution
