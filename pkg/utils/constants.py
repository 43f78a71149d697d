"""
Shared constants and configurations for the constrained MDP solver.

This module contains all the constants used across different modules including:
- Validation tolerances applied when models and strategies are loaded
- Numerical tolerances of the occupation, LP and decomposition pipeline
- Search limits and guards
- Exit codes of the command-line interface
- Default configuration values
"""

from enum import Enum
from typing import Dict

# ============================================================================
# MODEL CONSTANTS
# ============================================================================

# Identifier of the action added by make_stopping_mdp
STOP_ACTION: str = "STOP"

# Separator used in "state/action" cost keys of model files
PAIR_KEY_SEPARATOR: str = "/"


class DocumentKind(Enum):
    """Kinds of JSON documents understood by the file layer."""
    MODEL = "model"
    OCCUPATION = "occupation"
    DETERMINISTIC = "deterministic"
    STATIONARY = "stationary"
    MARKOV = "markov"
    MIXED = "mixed"
    SOLUTION = "solution"
    DECOMPOSITION = "decomposition"
    SIMULATION = "simulation"
    FINITENESS = "finiteness"
    ASSUMPTION = "assumption"
    EXTREMALITY = "extremality"
    ENUMERATION = "enumeration"

    @classmethod
    def from_value(cls, value: str) -> 'DocumentKind':
        """
        Get document kind from its string value.

        Args:
            value: The "kind" field of a document

        Returns:
            DocumentKind enum value

        Raises:
            ValueError: If the kind is not supported
        """
        for kind in cls:
            if kind.value == value:
                return kind
        raise ValueError(f"Unsupported document kind: {value}")


# ============================================================================
# VALIDATION TOLERANCES (not affected by --tol)
# ============================================================================

# Allowed excess of a kernel row sum over 1
ROW_SUM_TOLERANCE: float = 1e-12

# Negative kernel entries down to this value are clamped to 0 on load
NEGATIVE_CLAMP_TOLERANCE: float = 1e-15

# Absorption deficits at or below this value are treated as exactly 0
ABSORPTION_ZERO_TOLERANCE: float = 1e-12

# Row sums of stationary kernels and mixture weights must be 1 within this
STRATEGY_ROW_TOLERANCE: float = 1e-12
MIXTURE_WEIGHT_TOLERANCE: float = 1e-12

# ============================================================================
# NUMERICAL TOLERANCES (scaled by --tol)
# ============================================================================

DEFAULT_FLOW_RESIDUAL_TOLERANCE: float = 1e-9
DEFAULT_ZERO_MARGINAL_TOLERANCE: float = 1e-12
DEFAULT_SINGULAR_TOLERANCE: float = 1e-12
DEFAULT_PIVOT_TOLERANCE: float = 1e-10
DEFAULT_FEASIBILITY_TOLERANCE: float = 1e-9
DEFAULT_VERTEX_DEDUP_TOLERANCE: float = 1e-8
DEFAULT_DECOMPOSITION_TOLERANCE: float = 1e-8
DEFAULT_EXTREME_TOLERANCE: float = 1e-9
DEFAULT_VALUE_ITERATION_TOLERANCE: float = 1e-10

# LP values with magnitude below this are reported as exact zeros
LP_ZERO_CHOP: float = 1e-11

# Entries with zero standard error must match the analytic value within this
ZERO_ERROR_MATCH_TOLERANCE: float = 1e-12

# ============================================================================
# LIMITS AND GUARDS
# ============================================================================

# Hard cap on simplex pivots (IterationLimit above it)
SIMPLEX_MAX_PIVOTS: int = 10 ** 6

# Bland's rule takes over after this many pivots per (rows + columns) in a phase
BLAND_SWITCH_FACTOR: int = 2

# Value iteration sweep cap (NonConvergent above it)
VALUE_ITERATION_MAX_SWEEPS: int = 10 ** 5

# Maximum number of selectors enumerate_deterministic will walk through
SELECTOR_ENUMERATION_GUARD: int = 10 ** 6

# Full enumeration joins the decomposition pool below this selector count
SMALL_INSTANCE_SELECTORS: int = 4096

# Support-consistent selectors are enumerated exhaustively below this count
SUPPORT_POOL_LIMIT: int = 4096

# Number of low-discrepancy Lagrangian weight vectors on the simplex
LAGRANGIAN_GRID_POINTS: int = 20

# Horizon used for survival probabilities in finiteness reports
FINITENESS_REPORT_HORIZON: int = 50

# Default vertex enumeration limit
DEFAULT_VERTEX_LIMIT: int = 10000

# ============================================================================
# SIMULATION DEFAULTS
# ============================================================================

DEFAULT_TRAJECTORIES: int = 10000
DEFAULT_SEED: int = 0
DEFAULT_STEP_CAP: int = 10000
SIMULATION_CHUNK_SIZE: int = 2048

# ============================================================================
# EXIT CODES
# ============================================================================

EXIT_SUCCESS: int = 0
EXIT_INFEASIBLE: int = 2
EXIT_ASSUMPTION_VIOLATED: int = 3
EXIT_VALIDATION_ERROR: int = 4
EXIT_NUMERICAL_FAILURE: int = 5

EXIT_CODE_DESCRIPTIONS: Dict[int, str] = {
    EXIT_SUCCESS: "success",
    EXIT_INFEASIBLE: "problem infeasible",
    EXIT_ASSUMPTION_VIOLATED: "penalization assumption violated",
    EXIT_VALIDATION_ERROR: "validation error",
    EXIT_NUMERICAL_FAILURE: "internal numerical failure",
}

# ============================================================================
# DEFAULT CONFIGURATION VALUES
# ============================================================================

# Environment variables
ENV_LOG_LEVEL: str = "CMIX_LOG_LEVEL"
ENV_WORKERS: str = "CMIX_WORKERS"
ENV_TOL_SCALE: str = "CMIX_TOL_SCALE"

DEFAULT_WORKERS: int = 1

# Default log format
DEFAULT_LOG_FORMAT: str = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DEFAULT_LOG_DATE_FORMAT: str = '%Y-%m-%d %H:%M:%S'

# Application metadata
APP_NAME: str = "Constrained MDP Mixture Suite"
APP_VERSION: str = "1.0.0"
APP_DESCRIPTION: str = """
Solver for finite constrained total-cost MDPs with a costless cemetery state:
- Occupation measures of stationary, Markov and mixed strategies
- Occupation-measure linear program with a dense two-phase simplex
- Extreme-point tests and vertex enumeration of the flow polytope
- Optimal mixtures of at most J+1 deterministic stationary strategies
- Seeded Monte Carlo cross-validation
"""
