"""Tests for the penalization-assumption checker."""

import numpy as np

from core.documents import parse_model
from core.model import ConstrainedProblem, FiniteMdpModel
from processors.assumption_checker import (
    check_penalization_assumption,
    prefix_cost_vector,
    stay_forever_strategy,
)
from processors.occupancy import classify_finiteness
from core.strategies import as_stationary


def with_zero_cost_loop(model: FiniteMdpModel, state: int) -> FiniteMdpModel:
    """Append a free self-loop action 'z' at the given state."""
    insert = model.offsets[state + 1]
    loop_row = np.zeros(model.n_states)
    loop_row[state] = 1.0
    kernel = np.insert(model.kernel, insert, loop_row, axis=0)
    costs = np.insert(model.costs, insert, 0.0, axis=1)
    actions = [list(acts) for acts in model.actions]
    actions[state].append("z")
    return FiniteMdpModel.from_arrays(model.states, actions, kernel, costs, model.initial, model.cost_names)


def test_zeroloop_violates(models_dir):
    check = check_penalization_assumption(parse_model(models_dir / "zeroloop.json"))
    assert not check.holds
    assert check.witness == frozenset({("s0", "a")})


def test_costly_loop_satisfies(loop):
    model = loop.with_costs([[0.0], [1.0]], ["cost", "time"])
    check = check_penalization_assumption(ConstrainedProblem(model, (5.0,)))
    assert check.holds
    assert check.witness is None


def test_stopping_model_holds(stopping_problem):
    assert check_penalization_assumption(stopping_problem).holds


def test_unreachable_zero_component_is_ignored():
    model = FiniteMdpModel.from_arrays(
        ["s0", "s1"], [["a"], ["a"]], [[0.0, 0.0], [0.0, 1.0]], [1.0, 0.0])
    assert check_penalization_assumption(ConstrainedProblem(model)).holds


def test_stay_forever_walks_into_the_witness():
    model = FiniteMdpModel.from_arrays(
        ["s0", "s1"], [["stop", "go"], ["a"]],
        [[0.0, 0.0], [0.0, 1.0], [0.0, 1.0]], [1.0, 2.0, 0.0],
    )
    check = check_penalization_assumption(ConstrainedProblem(model))
    assert check.witness == frozenset({("s1", "a")})
    selector = stay_forever_strategy(model, check.witness)
    assert selector.as_mapping() == {"s0": "go", "s1": "a"}
    assert not classify_finiteness(model, as_stationary(selector)).is_finite
    assert prefix_cost_vector(model, selector, check.witness).values == (2.0,)


def test_random_models_with_planted_loops(make_model):
    rng = np.random.default_rng(41)
    for trial in range(100):
        base = make_model(rng, int(rng.integers(1, 6)), 3, n_costs=2)
        planted = trial % 2 == 0
        if planted:
            state = int(rng.integers(base.n_states))
            model = with_zero_cost_loop(base, state)
        else:
            model = base
        problem = ConstrainedProblem(model, (1.0,))
        check = check_penalization_assumption(problem)
        assert check.holds is not planted
        if not planted:
            continue

        assert check.witness == frozenset({(model.states[state], "z")})
        selector = stay_forever_strategy(model, check.witness)
        assert not classify_finiteness(model, as_stationary(selector)).is_finite
        prefix = prefix_cost_vector(model, selector, check.witness)
        assert np.all(np.isfinite(prefix.as_array()))
