"""
Runtime configuration: numerical tolerances and environment settings.

Tolerances travel explicitly through the solver pipeline as a frozen
Tolerances instance; the CLI --tol flag scales every default at once.
Environment settings may come from a .env file when python-dotenv is
installed.
"""

import os
from dataclasses import dataclass, fields, replace
from typing import Optional

from .constants import (
    DEFAULT_FLOW_RESIDUAL_TOLERANCE,
    DEFAULT_ZERO_MARGINAL_TOLERANCE,
    DEFAULT_SINGULAR_TOLERANCE,
    DEFAULT_PIVOT_TOLERANCE,
    DEFAULT_FEASIBILITY_TOLERANCE,
    DEFAULT_VERTEX_DEDUP_TOLERANCE,
    DEFAULT_DECOMPOSITION_TOLERANCE,
    DEFAULT_EXTREME_TOLERANCE,
    DEFAULT_VALUE_ITERATION_TOLERANCE,
    DEFAULT_WORKERS,
    ENV_LOG_LEVEL,
    ENV_WORKERS,
    ENV_TOL_SCALE,
)

# Try to load a .env file if python-dotenv is available
try:
    from dotenv import load_dotenv
    _dotenv_available = True
except ImportError:
    _dotenv_available = False


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances of the solver pipeline."""
    flow_residual: float = DEFAULT_FLOW_RESIDUAL_TOLERANCE
    zero_marginal: float = DEFAULT_ZERO_MARGINAL_TOLERANCE
    singular: float = DEFAULT_SINGULAR_TOLERANCE
    pivot: float = DEFAULT_PIVOT_TOLERANCE
    feasibility: float = DEFAULT_FEASIBILITY_TOLERANCE
    vertex_dedup: float = DEFAULT_VERTEX_DEDUP_TOLERANCE
    decomposition: float = DEFAULT_DECOMPOSITION_TOLERANCE
    extreme: float = DEFAULT_EXTREME_TOLERANCE
    value_iteration: float = DEFAULT_VALUE_ITERATION_TOLERANCE

    def scaled(self, factor: float) -> 'Tolerances':
        """
        Return a copy with every tolerance multiplied by factor.

        Args:
            factor: Positive scaling factor

        Returns:
            Scaled Tolerances instance

        Raises:
            ValueError: If factor is not positive

        Example:
            >>> loose = Tolerances().scaled(10.0)
            >>> loose.flow_residual
            1e-08
        """
        if not factor > 0:
            raise ValueError(f"Tolerance scale must be positive, got {factor}")
        return replace(self, **{f.name: getattr(self, f.name) * factor for f in fields(self)})


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class Settings:
    """Settings read from the environment."""
    log_level: str = "WARNING"
    workers: int = DEFAULT_WORKERS
    tolerance_scale: float = 1.0

    @classmethod
    def from_environment(cls, env_file: Optional[str] = None) -> 'Settings':
        """
        Build settings from CMIX_* environment variables.

        Args:
            env_file: Optional explicit .env path (python-dotenv required)

        Returns:
            Settings instance; malformed values fall back to defaults
        """
        if _dotenv_available:
            load_dotenv(env_file) if env_file else load_dotenv()

        log_level = os.environ.get(ENV_LOG_LEVEL, cls.log_level).upper()

        try:
            workers = max(1, int(os.environ.get(ENV_WORKERS, DEFAULT_WORKERS)))
        except ValueError:
            workers = DEFAULT_WORKERS

        try:
            tolerance_scale = float(os.environ.get(ENV_TOL_SCALE, 1.0))
            if not tolerance_scale > 0:
                tolerance_scale = 1.0
        except ValueError:
            tolerance_scale = 1.0

        return cls(log_level=log_level, workers=workers, tolerance_scale=tolerance_scale)

    def tolerances(self) -> Tolerances:
        """Tolerances scaled by the configured factor."""
        return DEFAULT_TOLERANCES.scaled(self.tolerance_scale)
