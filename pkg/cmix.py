#!/usr/bin/env python3
"""
Constrained MDP Mixture Suite - Main Application Entry Point
============================================================

Keep the root directory clean: functionality lives in core/, processors/,
ui/ and utils/.

A solver for finite constrained total-cost Markov decision processes with a
costless cemetery state, supporting:
- Occupation measures of stationary, Markov and mixed strategies
- The occupation-measure linear program (dense two-phase simplex)
- Optimal mixtures of at most J+1 deterministic stationary strategies
- Penalization-assumption and extreme-point checks
- Seeded Monte Carlo cross-validation

Usage:
    cmix validate models/twoact.json
    cmix solve models/twoact.json -o opt.json
    cmix check-assumption models/zeroloop.json
    cmix simulate models/geometric.json --n 100000 --seed 42

    # Help
    cmix --help
    cmix <command> --help
"""

import sys
from pathlib import Path

# Add the current directory to Python path for imports
sys.path.insert(0, str(Path(__file__).parent))

from utils.constants import APP_NAME, APP_VERSION
from ui.cli import CLIHandler


def print_system_info():
    """Print system and application information to stderr."""
    import platform

    print(f"{APP_NAME} v{APP_VERSION}", file=sys.stderr)
    print(f"Python {platform.python_version()}", file=sys.stderr)
    print(f"Platform: {platform.system()} {platform.release()}", file=sys.stderr)
    print(file=sys.stderr)


def main():
    """
    Main application entry point.

    Parses the command line and exits with the handler's exit code.
    """
    if '--debug' in sys.argv or '-d' in sys.argv:
        print_system_info()

    try:
        exit_code = CLIHandler().run(sys.argv[1:])
    except KeyboardInterrupt:
        print("\nOperation cancelled by user.", file=sys.stderr)
        exit_code = 1
    sys.exit(exit_code)


if __name__ == '__main__':
    main()
