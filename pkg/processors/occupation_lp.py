"""
The occupation-measure linear program and its flow polytope.

This module provides:
- build_occupation_lp: flow-balance equalities, cost constraints, objective R_0
- enumerate_vertices: basic feasible solutions of the pure flow polytope
- write_mps: fixed-column MPS dump for cross-checking with external solvers
"""

import itertools
from dataclasses import dataclass
from typing import List, TextIO

import numpy as np

from core.model import ConstrainedProblem
from utils.config import Tolerances, DEFAULT_TOLERANCES
from utils.constants import DEFAULT_VERTEX_LIMIT
from utils.errors import ModelValidationError, UnboundedPolytope
from utils.logging_config import get_logger
from .simplex import StandardFormLp, simplex_solve

logger = get_logger(__name__)


@dataclass(frozen=True)
class VertexEnumeration:
    """Distinct vertices found, and whether the search stopped at its limit."""
    vertices: List[np.ndarray]
    truncated: bool


def build_occupation_lp(problem: ConstrainedProblem) -> StandardFormLp:
    """
    Build the occupation-measure LP of a constrained problem.

    Columns are the state-action pairs in model order. Equality row x reads
    sum_a M[x][a] - sum_{y,a} p(x|y,a) M[y][a] = delta_x0(x); inequality row j
    reads sum r_j M <= d_j; the objective is sum r_0 M.

    Example:
        >>> lp = build_occupation_lp(twoact_problem)
        >>> (lp.n_columns, lp.n_equalities, lp.n_inequalities)
        (2, 1, 1)
    """
    model = problem.model
    a_eq = model.incidence - model.kernel.T
    lp = StandardFormLp(
        objective=model.costs[0],
        a_eq=a_eq,
        b_eq=model.initial_distribution(),
        a_ub=model.costs[1:],
        b_ub=np.array(problem.bounds),
        column_labels=model.pair_labels,
        row_labels=tuple(f"flow:{s}" for s in model.states)
                   + tuple(f"cost:{name}" for name in model.cost_names[1:]),
    )
    logger.debug(f"Occupation LP: {lp.n_columns} columns, {lp.n_equalities} equalities, "
                 f"{lp.n_inequalities} inequalities")
    return lp


def _independent_rows(matrix: np.ndarray) -> np.ndarray:
    """Greedy maximal set of linearly independent rows, in order."""
    kept: List[int] = []
    for i in range(matrix.shape[0]):
        trial = kept + [i]
        if np.linalg.matrix_rank(matrix[trial]) == len(trial):
            kept.append(i)
    return np.array(kept, dtype=int)


def enumerate_vertices(lp: StandardFormLp, limit: int = DEFAULT_VERTEX_LIMIT,
                       tolerances: Tolerances = DEFAULT_TOLERANCES) -> VertexEnumeration:
    """
    All basic feasible solutions of a flow polytope {A x = b, x >= 0}.

    Bases are visited in lexicographic column order and vertices are
    deduplicated in sup-norm.

    Args:
        lp: LP without inequality rows (single cost table)
        limit: Stop after this many distinct vertices
        tolerances: Feasibility and deduplication tolerances

    Returns:
        VertexEnumeration with truncated set when the limit was hit

    Raises:
        ModelValidationError: If the LP has inequality rows
        UnboundedPolytope: If the polytope has a recession direction
    """
    if lp.n_inequalities:
        raise ModelValidationError("Vertex enumeration needs a pure flow polytope (J = 0)")

    n = lp.n_columns
    # Bounded iff no x >= 0 with A x = 0 and sum x = 1
    ray_lp = StandardFormLp(
        objective=-np.ones(n), a_eq=lp.a_eq, b_eq=np.zeros(lp.n_equalities),
        a_ub=np.ones((1, n)), b_ub=np.ones(1),
    )
    ray = simplex_solve(ray_lp, tolerances)
    if not ray.is_optimal or ray.objective < -tolerances.feasibility:
        raise UnboundedPolytope("Flow polytope is unbounded: some end component never leaks")

    keep = _independent_rows(lp.a_eq)
    a_eq, b_eq = lp.a_eq[keep], lp.b_eq[keep]
    rank = len(keep)

    vertices: List[np.ndarray] = []
    truncated = False
    for columns in itertools.combinations(range(n), rank):
        basis_matrix = a_eq[:, columns]
        if np.linalg.matrix_rank(basis_matrix) < rank:
            continue
        basic = np.linalg.solve(basis_matrix, b_eq)
        if np.any(basic < -tolerances.feasibility):
            continue
        point = np.zeros(n)
        point[list(columns)] = np.maximum(basic, 0.0)
        if any(np.max(np.abs(point - v)) <= tolerances.vertex_dedup for v in vertices):
            continue
        if len(vertices) >= limit:
            # Only a vertex beyond the limit proves the list incomplete
            truncated = True
            logger.warning(f"Vertex enumeration stopped at the limit of {limit} vertices")
            break
        vertices.append(point)

    logger.info(f"Enumerated {len(vertices)} vertices of the flow polytope")
    return VertexEnumeration(vertices, truncated)


def _mps_name(prefix: str, index: int) -> str:
    return f"{prefix}{index}"


def write_mps(lp: StandardFormLp, stream: TextIO, name: str = "OCCLP") -> None:
    """
    Write the LP in fixed-column MPS format.

    Rows are named F<i> (equalities) and C<j> (inequalities), columns X<k>;
    comment lines map the short names back to labels.
    """
    def field(value: float) -> str:
        return f"{value:.12g}"

    stream.write(f"NAME          {name}\n")
    for k, label in enumerate(lp.column_labels):
        stream.write(f"* {_mps_name('X', k)} = {label}\n")
    for i, label in enumerate(lp.row_labels):
        prefix, index = ('F', i) if i < lp.n_equalities else ('C', i - lp.n_equalities)
        stream.write(f"* {_mps_name(prefix, index)} = {label}\n")

    stream.write("ROWS\n")
    stream.write(" N  COST\n")
    for i in range(lp.n_equalities):
        stream.write(f" E  {_mps_name('F', i)}\n")
    for j in range(lp.n_inequalities):
        stream.write(f" L  {_mps_name('C', j)}\n")

    stream.write("COLUMNS\n")
    for k in range(lp.n_columns):
        column = _mps_name('X', k)
        entries = [('COST', lp.objective[k])]
        entries += [(_mps_name('F', i), lp.a_eq[i, k]) for i in range(lp.n_equalities)]
        entries += [(_mps_name('C', j), lp.a_ub[j, k]) for j in range(lp.n_inequalities)]
        for row, value in entries:
            if value != 0.0:
                stream.write(f"    {column:<8}  {row:<8}  {field(value):>12}\n")

    stream.write("RHS\n")
    rhs = [(_mps_name('F', i), lp.b_eq[i]) for i in range(lp.n_equalities)]
    rhs += [(_mps_name('C', j), lp.b_ub[j]) for j in range(lp.n_inequalities)]
    for row, value in rhs:
        if value != 0.0:
            stream.write(f"    {'RHS':<8}  {row:<8}  {field(value):>12}\n")
    stream.write("ENDATA\n")
