"""
User interface modules.

This package contains the command-line interface:
- Subcommand parsing and dispatch
- Exit-code mapping of solver errors
"""

from .cli import CLIHandler, main

__all__ = [
    'CLIHandler',
    'main',
]
