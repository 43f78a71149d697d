"""
Utility modules.

This package contains shared utility functions and configurations:
- File I/O operations for JSON documents
- Logging configuration
- Numerical tolerances and environment settings
- The exception hierarchy
- Shared constants and configurations
"""

from .file_operations import FileHandler
from .logging_config import setup_logging, get_logger
from .config import Tolerances, Settings, DEFAULT_TOLERANCES
from .constants import (
    DocumentKind,
    STOP_ACTION,
    EXIT_SUCCESS,
    EXIT_INFEASIBLE,
    EXIT_ASSUMPTION_VIOLATED,
    EXIT_VALIDATION_ERROR,
    EXIT_NUMERICAL_FAILURE,
    DEFAULT_LOG_FORMAT,
    DEFAULT_LOG_DATE_FORMAT,
    APP_NAME,
    APP_VERSION,
    APP_DESCRIPTION,
)

__all__ = [
    'FileHandler',
    'setup_logging',
    'get_logger',
    'Tolerances',
    'Settings',
    'DEFAULT_TOLERANCES',
    'DocumentKind',
    'STOP_ACTION',
    'EXIT_SUCCESS',
    'EXIT_INFEASIBLE',
    'EXIT_ASSUMPTION_VIOLATED',
    'EXIT_VALIDATION_ERROR',
    'EXIT_NUMERICAL_FAILURE',
    'DEFAULT_LOG_FORMAT',
    'DEFAULT_LOG_DATE_FORMAT',
    'APP_NAME',
    'APP_VERSION',
    'APP_DESCRIPTION',
]
