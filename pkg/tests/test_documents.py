"""Tests for JSON documents and file handling."""

import json
import math

import numpy as np
import pytest

from core.documents import (
    assumption_to_document,
    finiteness_to_document,
    occupation_to_document,
    parse_model,
    parse_occupation_document,
    parse_problem_document,
    parse_strategy_document,
    problem_to_document,
    simulation_to_document,
    strategy_to_document,
)
from core.strategies import (
    DeterministicStrategy,
    MarkovStrategy,
    MixedStrategy,
    StationaryStrategy,
    as_stationary,
)
from processors.assumption_checker import AssumptionCheck
from processors.occupancy import ObjectiveVector, OccupationMeasure, classify_finiteness
from processors.simulator import simulate
from utils.errors import (
    DuplicateIdentifier,
    InvalidStrategy,
    ParseError,
    UnknownActionReference,
    UnknownStateReference,
)
from utils.file_operations import FileHandler


def twoact_document():
    return {
        "states": ["s0"],
        "actions": ["a", "b"],
        "initial": "s0",
        "transitions": [
            {"from": "s0", "action": "a"},
            {"from": "s0", "action": "b"},
        ],
        "costs": [
            {"name": "cost", "entries": {"s0/b": 1.0}},
            {"name": "risk", "entries": {"s0/a": 1.0}},
            {"name": "unused", "default": 3.0},
        ],
        "objective": "cost",
        "constraints": [{"cost": "risk", "bound": 0.5}],
    }


class TestModelFiles:
    def test_shipped_models_are_canonical(self, models_dir):
        paths = sorted(models_dir.glob("*.json"))
        assert paths
        for path in paths:
            text = path.read_text(encoding="utf-8")
            assert FileHandler.dumps(problem_to_document(parse_model(path))) == text, path.name

    def test_objective_first_and_unused_tables_dropped(self):
        problem = parse_problem_document(twoact_document())
        assert problem.model.cost_names == ("cost", "risk")
        assert problem.bounds == (0.5,)
        np.testing.assert_array_equal(problem.model.costs, [[0.0, 1.0], [1.0, 0.0]])

    def test_constraint_order_follows_the_file(self):
        raw = twoact_document()
        raw["objective"] = "unused"
        raw["constraints"] = [{"cost": "risk", "bound": 1.0}, {"cost": "cost", "bound": 2.0}]
        problem = parse_problem_document(raw)
        assert problem.model.cost_names == ("unused", "risk", "cost")
        assert problem.bounds == (1.0, 2.0)

    def test_missing_objective(self):
        raw = twoact_document()
        del raw["objective"]
        with pytest.raises(ParseError) as excinfo:
            parse_problem_document(raw)
        assert excinfo.value.key == "objective"

    def test_constraint_on_the_objective(self):
        raw = twoact_document()
        raw["constraints"] = [{"cost": "cost", "bound": 1.0}]
        with pytest.raises(DuplicateIdentifier):
            parse_problem_document(raw)

    def test_non_numeric_bound(self):
        raw = twoact_document()
        raw["constraints"] = [{"cost": "risk", "bound": "low"}]
        with pytest.raises(ParseError):
            parse_problem_document(raw)

    def test_wrong_kind(self):
        raw = twoact_document()
        raw["kind"] = "occupation"
        with pytest.raises(ParseError):
            parse_problem_document(raw)


class TestReadDocument:
    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            FileHandler.read_document(tmp_path / "absent.json")

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "states": [\n    "s0",\n  ]\n}\n', encoding="utf-8")
        with pytest.raises(ParseError) as excinfo:
            FileHandler.read_document(path)
        assert excinfo.value.line == 4

    def test_top_level_must_be_an_object(self):
        with pytest.raises(ParseError):
            FileHandler.parse_document("[1, 2]")

    def test_dumps_refuses_nan(self):
        with pytest.raises(ValueError):
            FileHandler.dumps({"x": math.nan})

    def test_safe_write_then_emit(self, tmp_path):
        target = tmp_path / "out" / "report.json"
        FileHandler.emit({"kind": "occupation"}, target, None)
        assert json.loads(target.read_text(encoding="utf-8")) == {"kind": "occupation"}
        assert [p.name for p in target.parent.iterdir()] == ["report.json"]


class TestStrategyDocuments:
    def test_round_trip_of_every_class(self, chain2, twoact):
        selector = DeterministicStrategy.lowest_index(chain2)
        strategies = [
            selector,
            StationaryStrategy.uniform(twoact),
            MarkovStrategy((as_stationary(DeterministicStrategy(twoact, (0,))),),
                           StationaryStrategy.uniform(twoact)),
            MixedStrategy(((0.25, DeterministicStrategy(twoact, (0,))),
                           (0.75, DeterministicStrategy(twoact, (1,))))),
        ]
        for strategy in strategies:
            model = strategy.model
            document = json.loads(FileHandler.dumps(strategy_to_document(strategy)))
            parsed = parse_strategy_document(document, model)
            assert type(parsed) is type(strategy)
            assert strategy_to_document(parsed) == strategy_to_document(strategy)

    def test_kind_is_required(self, twoact):
        with pytest.raises(ParseError):
            parse_strategy_document({"selector": {"s0": "a"}}, twoact)

    def test_unknown_kind(self, twoact):
        with pytest.raises(ParseError):
            parse_strategy_document({"kind": "behavioural"}, twoact)

    def test_unknown_action(self, twoact):
        with pytest.raises(UnknownActionReference):
            parse_strategy_document({"kind": "stationary", "kernel": {"s0": {"z": 1.0}}}, twoact)

    def test_stationary_rows_must_cover_every_state(self, chain2):
        with pytest.raises(InvalidStrategy):
            parse_strategy_document({"kind": "stationary", "kernel": {"s0": {"a": 1.0}}}, chain2)

    def test_mixture_weights_must_sum_to_one(self, twoact):
        document = {"kind": "mixed", "components": [{"weight": 0.5, "selector": {"s0": "a"}}]}
        with pytest.raises(InvalidStrategy):
            parse_strategy_document(document, twoact)


class TestOccupationDocuments:
    def test_round_trip(self, twoact):
        measure = OccupationMeasure(twoact, [0.5, 0.5])
        document = occupation_to_document(measure)
        assert document["objective"] == {"cost": 0.5, "risk": 0.5}
        assert document["flow_residual"] == 0.0
        assert parse_occupation_document(document, twoact).distance(measure) == 0.0

    def test_kind_defaults_to_occupation(self, twoact):
        measure = parse_occupation_document({"table": {"s0": {"b": 1.0}}}, twoact)
        np.testing.assert_array_equal(measure.values, [0.0, 1.0])

    def test_unknown_state(self, twoact):
        with pytest.raises(UnknownStateReference):
            parse_occupation_document({"table": {"s9": {"a": 1.0}}}, twoact)


class TestReports:
    def test_finiteness_report(self, loop):
        document = finiteness_to_document(classify_finiteness(loop, StationaryStrategy.uniform(loop)))
        assert document == {
            "kind": "finiteness", "verdict": "infinite", "reachable": ["s0"],
            "witness": ["s0"], "tail_mass": None,
        }

    def test_assumption_report_writes_infinity_as_null(self, twoact):
        check = AssumptionCheck(False, frozenset({("s0", "b"), ("s0", "a")}))
        document = assumption_to_document(
            check, DeterministicStrategy(twoact, (0,)), ObjectiveVector((math.inf, 2.0)), twoact.cost_names)
        assert document["witness"] == [["s0", "a"], ["s0", "b"]]
        assert document["stay_forever"] == {"s0": "a"}
        assert document["prefix_costs"] == {"cost": None, "risk": 2.0}
        FileHandler.dumps(document)

    def test_simulation_report(self, twoact):
        report = simulate(twoact, DeterministicStrategy(twoact, (1,)), 10, seed=0)
        document = simulation_to_document(report, max_abs_z=math.inf)
        statistics = document["statistics"]
        assert document["table"] == {"s0": {"a": 0.0, "b": 1.0}}
        assert statistics["length_histogram"] == {"1": 10}
        assert statistics["costs"]["cost"] == {"mean": 1.0, "stderr": 0.0}
        assert statistics["max_abs_z"] is None
        FileHandler.dumps(document)
