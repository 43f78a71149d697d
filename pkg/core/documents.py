"""
JSON documents for models, strategies, occupation measures and reports.

This module provides:
- parse_problem_document / parse_model: model files -> ConstrainedProblem
- problem_to_document: canonical model files (re-serializing is byte-stable)
- Strategy and occupation documents in both directions
- Report builders for solve, decompose, simulate and the checkers

Every document is a JSON object with a "kind" field; model files may omit it.
"""

import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from processors.occupancy import OccupationMeasure, cost_vector, flow_residual
from utils.constants import DocumentKind, PAIR_KEY_SEPARATOR
from utils.errors import (
    DuplicateIdentifier,
    InvalidStrategy,
    ParseError,
    UnknownActionReference,
    UnknownStateReference,
)
from utils.file_operations import FileHandler
from utils.logging_config import get_logger
from .model import ConstrainedProblem, FiniteMdpModel, validate_model
from .strategies import DeterministicStrategy, MarkovStrategy, MixedStrategy, StationaryStrategy

logger = get_logger(__name__)

Document = Dict[str, Any]
Strategy = Union[DeterministicStrategy, StationaryStrategy, MarkovStrategy, MixedStrategy]


def _kind_of(raw: Mapping[str, Any], default: Optional[DocumentKind] = None) -> DocumentKind:
    value = raw.get("kind")
    if value is None:
        if default is None:
            raise ParseError("Document has no 'kind'", key="kind")
        return default
    try:
        return DocumentKind.from_value(value)
    except ValueError as e:
        raise ParseError(str(e), key="kind")


def _require_kind(raw: Mapping[str, Any], *expected: DocumentKind) -> DocumentKind:
    kind = _kind_of(raw, expected[0])
    if kind not in expected:
        names = ", ".join(k.value for k in expected)
        raise ParseError(f"Expected a document of kind {names}, got '{kind.value}'", key="kind")
    return kind


def _finite_or_none(value: float) -> Optional[float]:
    """JSON has no infinity; infinite values are written as null."""
    value = float(value)
    return value if math.isfinite(value) else None


# ============================================================================
# MODEL FILES
# ============================================================================

def model_to_document(model: FiniteMdpModel) -> Document:
    """Canonical model document: nonzero transitions and costs only."""
    transitions = []
    for p, (state, action) in enumerate(model.pair_labels):
        targets = {
            model.states[y]: float(model.kernel[p, y])
            for y in np.nonzero(model.kernel[p])[0]
        }
        transitions.append({"from": state, "action": action, "to": targets})

    costs = []
    for name, table in zip(model.cost_names, model.costs):
        entries = {
            f"{state}{PAIR_KEY_SEPARATOR}{action}": float(table[p])
            for p, (state, action) in enumerate(model.pair_labels) if table[p] != 0.0
        }
        costs.append({"name": name, "entries": entries})

    return {
        "kind": DocumentKind.MODEL.value,
        "states": list(model.states),
        "actions": {state: list(acts) for state, acts in zip(model.states, model.actions)},
        "initial": model.initial_state,
        "transitions": transitions,
        "costs": costs,
    }


def problem_to_document(problem: ConstrainedProblem) -> Document:
    """
    Canonical model file of a constrained problem.

    Example:
        >>> FileHandler.dumps(problem_to_document(parse_model(path))) == path.read_text()
        True
    """
    document = model_to_document(problem.model)
    document["objective"] = problem.objective_name
    document["constraints"] = [
        {"cost": name, "bound": float(bound)}
        for name, bound in zip(problem.model.cost_names[1:], problem.bounds)
    ]
    return document


def parse_problem_document(raw: Mapping[str, Any]) -> ConstrainedProblem:
    """
    Build a constrained problem from a parsed model file.

    Cost tables are reordered as objective first, then constraints in file
    order; tables referenced by neither are dropped with a warning.

    Raises:
        ParseError: If the objective is missing or a reference is unknown
        DuplicateIdentifier: If a cost is constrained twice or is also the objective
    """
    _require_kind(raw, DocumentKind.MODEL)
    model = validate_model(raw)

    if "objective" not in raw:
        raise ParseError("Missing required key 'objective'", key="objective")
    objective = raw["objective"]
    if objective not in model.cost_names:
        raise ParseError(f"Objective '{objective}' is not a declared cost", key="objective")

    raw_constraints = raw.get("constraints", [])
    if not isinstance(raw_constraints, list):
        raise ParseError("Expected a list of constraints", key="constraints")
    names: List[str] = [objective]
    bounds: List[float] = []
    for n, entry in enumerate(raw_constraints):
        key = f"constraints[{n}]"
        if not isinstance(entry, Mapping) or "cost" not in entry or "bound" not in entry:
            raise ParseError("Constraint must be a mapping with 'cost' and 'bound'", key=key)
        name = entry["cost"]
        if name not in model.cost_names:
            raise ParseError(f"Constraint references undeclared cost '{name}'", key=f"{key}.cost")
        if name in names:
            raise DuplicateIdentifier(f"Cost '{name}' is used twice as objective or constraint")
        bound = entry["bound"]
        if isinstance(bound, bool) or not isinstance(bound, (int, float)):
            raise ParseError(f"Bound of '{name}' is not a number", key=f"{key}.bound")
        names.append(name)
        bounds.append(float(bound))

    unused = [name for name in model.cost_names if name not in names]
    if unused:
        logger.warning(f"Ignoring cost tables not used by the problem: {unused}")

    order = [model.cost_names.index(name) for name in names]
    model = model.with_costs(model.costs[order], names)
    return ConstrainedProblem(model, tuple(bounds))


def parse_model(file_path: Path) -> ConstrainedProblem:
    """
    Read and validate a model file.

    Args:
        file_path: Path of a JSON model file

    Returns:
        ConstrainedProblem with states and actions in file order

    Raises:
        FileNotFoundError / IOError: If the file cannot be read
        ParseError: On malformed JSON or schema violations
        ModelValidationError: On invalid model contents
    """
    problem = parse_problem_document(FileHandler.read_document(Path(file_path)))
    logger.info(f"Loaded {problem.model!r} with {problem.n_constraints} constraints from {file_path}")
    return problem


# ============================================================================
# OCCUPATION MEASURES
# ============================================================================

def occupation_to_document(measure: OccupationMeasure) -> Document:
    """Occupation table with marginal, flow residual and cost integrals."""
    model = measure.model
    return {
        "kind": DocumentKind.OCCUPATION.value,
        "table": measure.as_table(),
        "marginal": {s: float(v) for s, v in zip(model.states, measure.marginal)},
        "flow_residual": flow_residual(model, measure),
        "objective": cost_vector(model, measure).as_dict(model.cost_names),
    }


def _table_values(model: FiniteMdpModel, table: Any, key: str) -> np.ndarray:
    if not isinstance(table, Mapping):
        raise ParseError("Expected a state -> {action: value} mapping", key=key)
    values = np.zeros(model.n_pairs)
    for state, row in table.items():
        if state not in model.state_index:
            raise UnknownStateReference(f"Document references unknown state '{state}'")
        if not isinstance(row, Mapping):
            raise ParseError(f"Row of state '{state}' must be a mapping", key=f"{key}.{state}")
        for action, value in row.items():
            if (state, action) not in model.pair_index:
                raise UnknownActionReference(f"Action '{action}' is not available at '{state}'")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParseError(f"Value at ({state}, {action}) is not a number", key=f"{key}.{state}")
            values[model.pair_index[(state, action)]] = float(value)
    return values


def parse_occupation_document(raw: Mapping[str, Any], model: FiniteMdpModel) -> OccupationMeasure:
    """Occupation measure over a model; missing entries are 0."""
    _require_kind(raw, DocumentKind.OCCUPATION)
    if "table" not in raw:
        raise ParseError("Missing required key 'table'", key="table")
    return OccupationMeasure(model, _table_values(model, raw["table"], "table"))


# ============================================================================
# STRATEGIES
# ============================================================================

def strategy_to_document(strategy: Strategy) -> Document:
    """Strategy document of any of the four supported classes."""
    if isinstance(strategy, DeterministicStrategy):
        return {"kind": DocumentKind.DETERMINISTIC.value, "selector": strategy.as_mapping()}
    if isinstance(strategy, StationaryStrategy):
        return {"kind": DocumentKind.STATIONARY.value, "kernel": strategy.as_rows()}
    if isinstance(strategy, MarkovStrategy):
        return {
            "kind": DocumentKind.MARKOV.value,
            "head": [k.as_rows() for k in strategy.head],
            "tail": strategy.tail.as_rows(),
        }
    if isinstance(strategy, MixedStrategy):
        return {
            "kind": DocumentKind.MIXED.value,
            "components": [
                {"weight": float(w), "selector": s.as_mapping()} for w, s in strategy
            ],
        }
    raise TypeError(f"Unsupported strategy type: {type(strategy).__name__}")


def _parse_selector(model: FiniteMdpModel, raw: Any, key: str) -> DeterministicStrategy:
    if not isinstance(raw, Mapping):
        raise ParseError("Selector must map states to actions", key=key)
    return DeterministicStrategy.from_mapping(model, raw)


def _parse_kernel(model: FiniteMdpModel, raw: Any, key: str) -> StationaryStrategy:
    if not isinstance(raw, Mapping):
        raise ParseError("Kernel must map states to action distributions", key=key)
    missing = [s for s in model.states if s not in raw]
    if missing:
        raise InvalidStrategy(f"Strategy has no row for state '{missing[0]}'")
    return StationaryStrategy(model, _table_values(model, raw, key))


def parse_strategy_document(raw: Mapping[str, Any], model: FiniteMdpModel) -> Strategy:
    """
    Parse a strategy document against a model.

    Raises:
        ParseError: On a missing kind or malformed content
        InvalidStrategy: If rows or weights do not form a strategy
    """
    if "kind" not in raw:
        raise ParseError("Strategy document has no 'kind'", key="kind")
    kind = _require_kind(raw, DocumentKind.DETERMINISTIC, DocumentKind.STATIONARY,
                         DocumentKind.MARKOV, DocumentKind.MIXED)

    def field(name: str) -> Any:
        if name not in raw:
            raise ParseError(f"Missing required key '{name}'", key=name)
        return raw[name]

    if kind is DocumentKind.DETERMINISTIC:
        return _parse_selector(model, field("selector"), "selector")
    if kind is DocumentKind.STATIONARY:
        return _parse_kernel(model, field("kernel"), "kernel")
    if kind is DocumentKind.MARKOV:
        head = field("head")
        if not isinstance(head, list):
            raise ParseError("'head' must be a list of kernels", key="head")
        kernels = tuple(_parse_kernel(model, k, f"head[{n}]") for n, k in enumerate(head))
        return MarkovStrategy(kernels, _parse_kernel(model, field("tail"), "tail"))

    components = field("components")
    if not isinstance(components, list):
        raise ParseError("'components' must be a list", key="components")
    parsed = []
    for n, entry in enumerate(components):
        key = f"components[{n}]"
        if not isinstance(entry, Mapping) or "weight" not in entry:
            raise ParseError("Component must be a mapping with 'weight' and 'selector'", key=key)
        weight = entry["weight"]
        if isinstance(weight, bool) or not isinstance(weight, (int, float)):
            raise ParseError("Component weight is not a number", key=f"{key}.weight")
        parsed.append((float(weight), _parse_selector(model, entry.get("selector"), f"{key}.selector")))
    return MixedStrategy(tuple(parsed))


def read_strategy(file_path: Path, model: FiniteMdpModel) -> Strategy:
    return parse_strategy_document(FileHandler.read_document(Path(file_path)), model)


def read_occupation(file_path: Path, model: FiniteMdpModel) -> OccupationMeasure:
    return parse_occupation_document(FileHandler.read_document(Path(file_path)), model)


# ============================================================================
# REPORTS
# ============================================================================

def decomposition_to_document(problem: ConstrainedProblem, result) -> Document:
    """Mixture, its objective vector and per-component objectives."""
    names = problem.model.cost_names
    return {
        "kind": DocumentKind.DECOMPOSITION.value,
        "mixture": strategy_to_document(result.mixture),
        "achieved": result.achieved.as_dict(names),
        "cardinality": result.cardinality,
        "fallback_flag": result.fallback_flag,
        "component_objectives": [c.as_dict(names) for c in result.component_objectives],
        "pool_size": result.pool_size,
    }


def solution_to_document(problem: ConstrainedProblem, occupation, decomposition,
                         lp_iterations: Optional[int] = None) -> Document:
    """Report of solve and find-feasible."""
    model = problem.model
    document = {
        "kind": DocumentKind.SOLUTION.value,
        "objective_name": problem.objective_name,
        "bounds": dict(zip(model.cost_names[1:], (float(d) for d in problem.bounds))),
        "occupation": occupation_to_document(occupation),
        "decomposition": decomposition_to_document(problem, decomposition),
    }
    if lp_iterations is not None:
        document["lp_iterations"] = lp_iterations
    return document


def finiteness_to_document(report) -> Document:
    return {
        "kind": DocumentKind.FINITENESS.value,
        "verdict": report.verdict.value,
        "reachable": list(report.reachable),
        "witness": list(report.witness) if report.witness is not None else None,
        "tail_mass": list(report.tail_mass) if report.tail_mass is not None else None,
    }


def assumption_to_document(check, stay_forever: Optional[DeterministicStrategy] = None,
                           prefix_costs=None, cost_names: Sequence[str] = ()) -> Document:
    document: Document = {
        "kind": DocumentKind.ASSUMPTION.value,
        "holds": check.holds,
        "witness": sorted([list(pair) for pair in check.witness]) if check.witness else None,
    }
    if stay_forever is not None:
        document["stay_forever"] = stay_forever.as_mapping()
    if prefix_costs is not None:
        document["prefix_costs"] = {
            name: _finite_or_none(v) for name, v in zip(cost_names, prefix_costs.values)
        }
    return document


def extremality_to_document(verdict) -> Document:
    return {
        "kind": DocumentKind.EXTREMALITY.value,
        "is_extreme": verdict.is_extreme,
        "witness": verdict.witness,
    }


def enumeration_to_document(model: FiniteMdpModel, evaluations) -> Document:
    """One entry per selector in enumeration order."""
    strategies = []
    for evaluation in evaluations:
        entry: Document = {
            "selector": evaluation.selector.as_mapping(),
            "finite": evaluation.report.is_finite,
        }
        if evaluation.objective is not None:
            entry["objective"] = evaluation.objective.as_dict(model.cost_names)
        else:
            entry["witness"] = list(evaluation.report.witness)
        strategies.append(entry)
    return {"kind": DocumentKind.ENUMERATION.value, "count": len(strategies), "strategies": strategies}


def simulation_to_document(report, max_abs_z: Optional[float] = None) -> Document:
    """Occupation-style tables of means and standard errors plus statistics."""
    model = report.model

    def table(values: np.ndarray) -> Dict[str, Dict[str, float]]:
        rows: Dict[str, Dict[str, float]] = {}
        for (state, action), value in zip(model.pair_labels, values):
            rows.setdefault(state, {})[action] = float(value)
        return rows

    document = {
        "kind": DocumentKind.SIMULATION.value,
        "table": table(report.occupation_mean),
        "marginal": {s: float(v) for s, v in zip(model.states, report.marginal_mean)},
        "statistics": {
            "n_trajectories": report.n_trajectories,
            "seed": report.seed,
            "step_cap": report.step_cap,
            "stderr": table(report.occupation_stderr),
            "marginal_stderr": {s: float(v) for s, v in zip(model.states, report.marginal_stderr)},
            "costs": {
                name: {"mean": float(m), "stderr": float(e)}
                for name, m, e in zip(model.cost_names, report.cost_mean, report.cost_stderr)
            },
            "length_histogram": {str(k): v for k, v in report.length_histogram.items()},
            "capped": report.capped,
        },
    }
    if max_abs_z is not None:
        document["statistics"]["max_abs_z"] = _finite_or_none(max_abs_z)
    return document
