"""
Command-line interface for the Constrained MDP Mixture Suite.

This module provides the batch surface of the solver: model validation,
constrained solving, decomposition, the structural checkers, strategy
evaluation, simulation, selector enumeration and stopping-model derivation.
Reports are JSON documents on stdout (or -o FILE); logs go to stderr.
"""

import argparse
import io
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO

import numpy as np

from core.documents import (
    assumption_to_document,
    decomposition_to_document,
    enumeration_to_document,
    extremality_to_document,
    finiteness_to_document,
    occupation_to_document,
    parse_model,
    problem_to_document,
    read_occupation,
    read_strategy,
    simulation_to_document,
    solution_to_document,
)
from core.model import ConstrainedProblem, make_stopping_mdp
from processors.assumption_checker import (
    check_penalization_assumption,
    prefix_cost_vector,
    stay_forever_strategy,
)
from processors.constrained_solver import ConstrainedSolver
from processors.decomposer import MixtureDecomposer, enumerate_deterministic, is_extreme
from processors.occupancy import FinitenessReport, minimality_repair, occupation_of
from processors.occupation_lp import build_occupation_lp, write_mps
from processors.simulator import compare_empirical, simulate
from utils.config import DEFAULT_TOLERANCES, Settings, Tolerances
from utils.constants import (
    APP_NAME,
    APP_VERSION,
    APP_DESCRIPTION,
    DEFAULT_SEED,
    DEFAULT_STEP_CAP,
    DEFAULT_TRAJECTORIES,
    EXIT_ASSUMPTION_VIOLATED,
    EXIT_INFEASIBLE,
    EXIT_NUMERICAL_FAILURE,
    EXIT_SUCCESS,
    EXIT_VALIDATION_ERROR,
    SELECTOR_ENUMERATION_GUARD,
)
from utils.errors import (
    AssumptionViolated,
    DuplicateIdentifier,
    InfeasibleProblem,
    ModelValidationError,
    NumericalFailure,
    ParseError,
)
from utils.file_operations import FileHandler
from utils.logging_config import get_logger, setup_logging

logger = get_logger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with the validation code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION_ERROR, f"{self.prog}: error: {message}\n")


def setup_cli_logging(verbose: bool = False, debug: bool = False,
                      default_level: str = "WARNING", log_file: Optional[Path] = None,
                      use_colors: bool = True) -> logging.Logger:
    """Set up logging for CLI operations."""
    if debug:
        level = logging.DEBUG
    elif verbose:
        level = logging.INFO
    else:
        level = getattr(logging, default_level.upper(), logging.WARNING)
    return setup_logging(level=level, log_file=log_file, use_colors=use_colors)


def _parse_stop_cost(text: str):
    """STATE=VALUE or STATE=V0,V1,... for per-table stop costs."""
    state, separator, value = text.partition("=")
    if not separator or not state:
        raise argparse.ArgumentTypeError(f"expected STATE=VALUE, got '{text}'")
    try:
        numbers = [float(v) for v in value.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"stop cost of '{state}' is not a number: '{value}'")
    return state, numbers[0] if len(numbers) == 1 else numbers


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got '{text}'")
    if value < 0:
        raise argparse.ArgumentTypeError(f"seed must be nonnegative, got {value}")
    return value


class CLIHandler:
    """Handles command-line interface operations."""

    def __init__(self, settings: Optional[Settings] = None, stdout: Optional[TextIO] = None):
        """
        Initialize the CLI handler.

        Args:
            settings: Environment settings (default: read from CMIX_* variables)
            stdout: Stream receiving reports when no -o is given (default: sys.stdout)
        """
        self.settings = settings if settings is not None else Settings.from_environment()
        self.stdout = stdout

    def create_parser(self) -> argparse.ArgumentParser:
        """
        Create the main argument parser with all subcommands.

        Returns:
            Configured ArgumentParser instance
        """
        parser = _ArgumentParser(
            prog='cmix',
            description=f"{APP_NAME} v{APP_VERSION}\n{APP_DESCRIPTION}",
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog="""
Examples:
  cmix validate models/twoact.json
  cmix solve models/twoact.json -o opt.json
  cmix check-assumption models/zeroloop.json
  cmix simulate models/twoact.json --n 100000 --seed 42 --compare opt.occ.json
  cmix stopping base.json --stop-cost s0=10 --stop-cost s1=4 -o stopping.json

Exit codes:
  0 success, 2 infeasible, 3 assumption violated,
  4 validation error, 5 internal numerical failure

For detailed help on any command:
  cmix <command> --help
            """
        )

        parser.add_argument('--version', action='version', version=f'{APP_NAME} {APP_VERSION}')
        parser.add_argument('-v', '--verbose', action='store_true', help='Enable verbose output')
        parser.add_argument('-d', '--debug', action='store_true', help='Enable debug output')
        parser.add_argument('--no-colors', action='store_true', help='Disable colored log output')
        parser.add_argument('--log-file', type=Path, help='Also write logs to this file')

        common = argparse.ArgumentParser(add_help=False)
        common.add_argument('-o', '--output', type=Path, help='Write the report to this file instead of stdout')
        common.add_argument('--tol', type=_positive_float, default=None,
                            help='Scale every numerical tolerance by this factor (default: 1)')
        common.add_argument('--workers', type=_positive_int, default=None,
                            help='Worker threads for candidate generation and simulation')

        subparsers = parser.add_subparsers(dest='command', help='Available commands')
        self._add_model_parsers(subparsers, common)
        self._add_measure_parsers(subparsers, common)
        self._add_strategy_parsers(subparsers, common)
        return parser

    def _add_model_parsers(self, subparsers, common):
        """Add commands that take a model file only."""
        validate_parser = subparsers.add_parser(
            'validate', parents=[common], help='Check a model file and print it in canonical form')
        validate_parser.add_argument('model', type=Path, help='Model file')

        solve_parser = subparsers.add_parser(
            'solve', parents=[common],
            help='Solve the constrained problem and decompose the optimum into a mixture')
        solve_parser.add_argument('model', type=Path, help='Model file')
        solve_parser.add_argument('--skip-assumption-check', action='store_true',
                                  help='Do not refuse problems with a reachable zero-cost end component')
        solve_parser.add_argument('--dump-lp', type=Path, metavar='PATH',
                                  help='Write the occupation LP in MPS format')

        feasible_parser = subparsers.add_parser(
            'find-feasible', parents=[common],
            help='Find a feasible mixture by minimizing the first constrained cost')
        feasible_parser.add_argument('model', type=Path, help='Model file')

        assumption_parser = subparsers.add_parser(
            'check-assumption', parents=[common],
            help='Look for a reachable end component whose costs are all zero')
        assumption_parser.add_argument('model', type=Path, help='Model file')

        enumerate_parser = subparsers.add_parser(
            'enumerate', parents=[common],
            help='Evaluate every deterministic stationary strategy')
        enumerate_parser.add_argument('model', type=Path, help='Model file')
        enumerate_parser.add_argument('--guard', type=_positive_int, default=SELECTOR_ENUMERATION_GUARD,
                                      help=f'Refuse models with more strategies (default: {SELECTOR_ENUMERATION_GUARD})')

        stopping_parser = subparsers.add_parser(
            'stopping', parents=[common],
            help='Add an absorbing STOP action to every state')
        stopping_parser.add_argument('model', type=Path, help='Base model file')
        stopping_parser.add_argument('--stop-cost', type=_parse_stop_cost, action='append', default=[],
                                     metavar='STATE=VALUE',
                                     help='Stop cost of a state; VALUE charges the objective, '
                                          'V0,V1,... sets every cost table (default: 0)')

    def _add_measure_parsers(self, subparsers, common):
        """Add commands that take a model and an occupation-measure file."""
        decompose_parser = subparsers.add_parser(
            'decompose', parents=[common],
            help='Repair an occupation measure and decompose it into a mixture')
        decompose_parser.add_argument('model', type=Path, help='Model file')
        decompose_parser.add_argument('occupation', type=Path, help='Occupation-measure file')

        extreme_parser = subparsers.add_parser(
            'check-extreme', parents=[common],
            help='Test whether an occupation measure is an extreme point')
        extreme_parser.add_argument('model', type=Path, help='Model file')
        extreme_parser.add_argument('occupation', type=Path, help='Occupation-measure file')

    def _add_strategy_parsers(self, subparsers, common):
        """Add commands that run a strategy."""
        evaluate_parser = subparsers.add_parser(
            'evaluate', parents=[common],
            help='Occupation measure and cost vector of a strategy')
        evaluate_parser.add_argument('model', type=Path, help='Model file')
        evaluate_parser.add_argument('strategy', type=Path, help='Strategy file')

        simulate_parser = subparsers.add_parser(
            'simulate', parents=[common],
            help='Monte Carlo estimate of occupation and costs')
        simulate_parser.add_argument('model', type=Path, help='Model file')
        simulate_parser.add_argument('--strategy', type=Path,
                                     help='Strategy file (default: the optimal mixture from solve)')
        simulate_parser.add_argument('--n', type=_positive_int, default=DEFAULT_TRAJECTORIES,
                                     help=f'Number of trajectories (default: {DEFAULT_TRAJECTORIES})')
        simulate_parser.add_argument('--seed', type=_seed, default=DEFAULT_SEED,
                                     help=f'Base seed (default: {DEFAULT_SEED})')
        simulate_parser.add_argument('--step-cap', type=_positive_int, default=DEFAULT_STEP_CAP,
                                     help=f'Decision cap per trajectory (default: {DEFAULT_STEP_CAP})')
        simulate_parser.add_argument('--compare', type=Path, metavar='OCCUPATION',
                                     help='Occupation-measure file to compare against (adds max |z|)')

    # ------------------------------------------------------------------
    # Dispatch
    # ------------------------------------------------------------------

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """Parse arguments and handle the command; returns the exit code."""
        parser = self.create_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return int(e.code) if isinstance(e.code, int) else EXIT_VALIDATION_ERROR
        return self.handle_command(args)

    def handle_command(self, args) -> int:
        """
        Handle the parsed command-line arguments.

        Args:
            args: Parsed arguments from argparse

        Returns:
            Exit code (see EXIT_CODE_DESCRIPTIONS)
        """
        setup_cli_logging(args.verbose, args.debug, self.settings.log_level,
                          args.log_file, use_colors=not args.no_colors)

        if not args.command:
            logger.error("No command specified. Use --help for usage information.")
            return EXIT_VALIDATION_ERROR

        handlers = {
            'validate': self._handle_validate,
            'solve': self._handle_solve,
            'find-feasible': self._handle_find_feasible,
            'decompose': self._handle_decompose,
            'check-extreme': self._handle_check_extreme,
            'check-assumption': self._handle_check_assumption,
            'evaluate': self._handle_evaluate,
            'simulate': self._handle_simulate,
            'enumerate': self._handle_enumerate,
            'stopping': self._handle_stopping,
        }
        try:
            return handlers[args.command](args)
        except InfeasibleProblem as e:
            logger.error(f"Infeasible: {e}")
            return EXIT_INFEASIBLE
        except AssumptionViolated as e:
            logger.error(f"Assumption violated: {e}")
            return EXIT_ASSUMPTION_VIOLATED
        except ParseError as e:
            logger.error(f"Parse error: {e}")
            return EXIT_VALIDATION_ERROR
        except (NumericalFailure, np.linalg.LinAlgError) as e:
            logger.error(f"Numerical failure: {e}")
            return EXIT_NUMERICAL_FAILURE
        except ModelValidationError as e:
            logger.error(f"Validation error: {e}")
            return EXIT_VALIDATION_ERROR
        except OSError as e:
            logger.error(f"File error: {e}")
            return EXIT_VALIDATION_ERROR
        except Exception as e:
            logger.error(f"Unexpected error: {e}")
            if args.debug:
                logger.exception("Traceback")
            return EXIT_NUMERICAL_FAILURE

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    def _tolerances(self, args) -> Tolerances:
        scale = args.tol if args.tol is not None else self.settings.tolerance_scale
        return DEFAULT_TOLERANCES.scaled(scale)

    def _workers(self, args) -> int:
        return args.workers if args.workers is not None else self.settings.workers

    def _emit(self, document, args) -> None:
        FileHandler.emit(document, args.output, self.stdout if self.stdout is not None else sys.stdout)

    # ------------------------------------------------------------------
    # Handlers
    # ------------------------------------------------------------------

    def _handle_validate(self, args) -> int:
        """Handle validate command."""
        problem = parse_model(args.model)
        logger.info(f"Model is valid: {problem.model!r}")
        self._emit(problem_to_document(problem), args)
        return EXIT_SUCCESS

    def _handle_solve(self, args) -> int:
        """Handle solve command."""
        problem = parse_model(args.model)
        if args.dump_lp:
            buffer = io.StringIO()
            write_mps(build_occupation_lp(problem), buffer)
            FileHandler.safe_write(args.dump_lp, buffer.getvalue())
            logger.info(f"Occupation LP written to {args.dump_lp}")

        solver = ConstrainedSolver(self._tolerances(args), self._workers(args),
                                   skip_assumption_check=args.skip_assumption_check)
        solution = solver.solve(problem)
        self._emit(solution_to_document(problem, solution.occupation, solution.decomposition,
                                        lp_iterations=solver.last_lp.iterations), args)
        return EXIT_SUCCESS

    def _handle_find_feasible(self, args) -> int:
        """Handle find-feasible command."""
        problem = parse_model(args.model)
        result = ConstrainedSolver(self._tolerances(args), self._workers(args)).find_feasible(problem)
        self._emit(solution_to_document(problem, result.occupation, result.decomposition), args)
        return EXIT_SUCCESS

    def _handle_decompose(self, args) -> int:
        """Handle decompose command."""
        problem = parse_model(args.model)
        tolerances = self._tolerances(args)
        measure = read_occupation(args.occupation, problem.model)
        repaired = minimality_repair(problem.model, measure, tolerances)
        result = MixtureDecomposer(tolerances, self._workers(args)).decompose(problem, repaired)
        document = decomposition_to_document(problem, result)
        document["occupation"] = occupation_to_document(repaired)
        self._emit(document, args)
        return EXIT_SUCCESS

    def _handle_check_extreme(self, args) -> int:
        """Handle check-extreme command."""
        problem = parse_model(args.model)
        measure = read_occupation(args.occupation, problem.model)
        verdict = is_extreme(problem.model, measure, self._tolerances(args).extreme)
        self._emit(extremality_to_document(verdict), args)
        return EXIT_SUCCESS

    def _handle_check_assumption(self, args) -> int:
        """Handle check-assumption command."""
        problem = parse_model(args.model)
        check = check_penalization_assumption(problem)
        if check.holds:
            self._emit(assumption_to_document(check), args)
            return EXIT_SUCCESS

        model = problem.model
        selector = stay_forever_strategy(model, check.witness)
        prefix = prefix_cost_vector(model, selector, check.witness, self._tolerances(args))
        self._emit(assumption_to_document(check, selector, prefix, model.cost_names), args)
        logger.error(f"Reachable zero-cost end component: {sorted(check.witness)}")
        return EXIT_ASSUMPTION_VIOLATED

    def _handle_evaluate(self, args) -> int:
        """Handle evaluate command."""
        problem = parse_model(args.model)
        strategy = read_strategy(args.strategy, problem.model)
        result = occupation_of(problem.model, strategy, self._tolerances(args))
        if isinstance(result, FinitenessReport):
            logger.warning(f"Strategy has an infinite occupation measure: {result.describe()}")
            self._emit(finiteness_to_document(result), args)
        else:
            self._emit(occupation_to_document(result), args)
        return EXIT_SUCCESS

    def _handle_simulate(self, args) -> int:
        """Handle simulate command."""
        problem = parse_model(args.model)
        model = problem.model
        workers = self._workers(args)
        if args.strategy is not None:
            strategy = read_strategy(args.strategy, model)
        else:
            logger.info("No strategy file given; simulating the optimal mixture")
            strategy = ConstrainedSolver(self._tolerances(args), workers).solve(problem).decomposition.mixture

        report = simulate(model, strategy, args.n, args.seed, args.step_cap, workers)
        max_abs_z = None
        if args.compare is not None:
            max_abs_z = compare_empirical(report, read_occupation(args.compare, model))
            print(f"max |z| = {max_abs_z:.6g}", file=sys.stderr)
        self._emit(simulation_to_document(report, max_abs_z), args)
        return EXIT_SUCCESS

    def _handle_enumerate(self, args) -> int:
        """Handle enumerate command."""
        problem = parse_model(args.model)
        evaluations = enumerate_deterministic(problem.model, args.guard, self._tolerances(args))
        self._emit(enumeration_to_document(problem.model, evaluations), args)
        return EXIT_SUCCESS

    def _handle_stopping(self, args) -> int:
        """Handle stopping command."""
        problem = parse_model(args.model)
        stop_costs: Dict[str, object] = {}
        for state, value in args.stop_cost:
            if state in stop_costs:
                raise DuplicateIdentifier(f"Stop cost of '{state}' given twice")
            stop_costs[state] = value
        stopping = make_stopping_mdp(problem.model, stop_costs)
        self._emit(problem_to_document(ConstrainedProblem(stopping, problem.bounds)), args)
        return EXIT_SUCCESS


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    return CLIHandler().run(argv)
