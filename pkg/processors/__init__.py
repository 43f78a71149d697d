"""
Solver modules.

This package contains the operations on models and strategies:
- Occupation measures, finiteness classification and markovization
- The occupation-measure LP and its dense simplex solver
- The penalization-assumption checker
- Extreme points and mixture decomposition
- End-to-end constrained solving
- Seeded Monte Carlo simulation
"""

from .occupancy import (
    OccupationMeasure,
    ObjectiveVector,
    FinitenessReport,
    classify_finiteness,
    occupation_of_stationary,
    occupation_of_markov,
    minimality_repair,
    markovize_mixture,
    cost_vector,
)
from .simplex import StandardFormLp, LpSolution, LpStatus, DenseSimplexSolver, simplex_solve
from .occupation_lp import build_occupation_lp, enumerate_vertices, write_mps
from .assumption_checker import check_penalization_assumption
from .decomposer import MixtureDecomposer, is_extreme, enumerate_deterministic, decompose_to_mixture
from .constrained_solver import ConstrainedSolver, solve_constrained, find_feasible
from .simulator import TrajectorySimulator, SimulationReport, simulate, compare_empirical

__all__ = [
    'OccupationMeasure',
    'ObjectiveVector',
    'FinitenessReport',
    'classify_finiteness',
    'occupation_of_stationary',
    'occupation_of_markov',
    'minimality_repair',
    'markovize_mixture',
    'cost_vector',
    'StandardFormLp',
    'LpSolution',
    'LpStatus',
    'DenseSimplexSolver',
    'simplex_solve',
    'build_occupation_lp',
    'enumerate_vertices',
    'write_mps',
    'check_penalization_assumption',
    'MixtureDecomposer',
    'is_extreme',
    'enumerate_deterministic',
    'decompose_to_mixture',
    'ConstrainedSolver',
    'solve_constrained',
    'find_feasible',
    'TrajectorySimulator',
    'SimulationReport',
    'simulate',
    'compare_empirical',
]
