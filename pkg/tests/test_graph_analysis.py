"""Tests for support-graph analysis."""

import numpy as np

from core.graph_analysis import (
    almost_sure_absorbing,
    distances_to,
    leaking_states,
    maximal_end_components,
    support_graph,
    trapped_states,
)
from core.model import FiniteMdpModel


def test_support_graph_edges(chain2):
    graph = support_graph(chain2)
    assert set(graph.nodes) == {0, 1}
    assert set(graph.edges) == {(0, 1)}


def test_support_graph_respects_pair_mask(loop_vs_stop):
    assert set(support_graph(loop_vs_stop).edges) == {(0, 0)}
    assert set(support_graph(loop_vs_stop, np.array([False, True])).edges) == set()


def test_leaking_and_trapped_states(loop):
    assert leaking_states(loop) == set()
    reachable, trapped = trapped_states(loop, np.array([True]), [0])
    assert reachable == {0}
    assert trapped == {0}


def test_end_component_of_loop(loop):
    assert maximal_end_components(loop) == [(frozenset({0}), frozenset({0}))]


def test_leaking_pairs_never_form_end_components(geometric):
    assert maximal_end_components(geometric) == []


def test_end_component_of_stopping_model(stopping_problem):
    model = stopping_problem.model
    go_pairs = frozenset(model.lookup_pair(s, "go") for s in model.states)
    assert maximal_end_components(model) == [(frozenset({0, 1, 2}), go_pairs)]


def test_allowed_pairs_restrict_end_components(stopping_problem):
    model = stopping_problem.model
    allowed = np.ones(model.n_pairs, dtype=bool)
    allowed[model.lookup_pair("s2", "go")] = False
    # Without s2/go the walk s1 -> s2 can no longer return, so s1/go leaves too
    components = maximal_end_components(model, allowed)
    assert components == []


def test_end_components_split_into_separate_classes():
    model = FiniteMdpModel.from_arrays(
        ["s0", "s1", "s2"], [["a"], ["a"], ["a"]],
        [[0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [0.0, 0.0, 0.0],
    )
    assert maximal_end_components(model) == [
        (frozenset({1}), frozenset({1})),
        (frozenset({2}), frozenset({2})),
    ]


def test_almost_sure_absorbing(loop, loop_vs_stop):
    inside, pairs = almost_sure_absorbing(loop)
    assert not inside.any() and not pairs.any()

    inside, pairs = almost_sure_absorbing(loop_vs_stop)
    assert inside.all() and pairs.all()


def test_distances_to_target(chain2):
    np.testing.assert_array_equal(distances_to(chain2, {1}), [1.0, 0.0])
    np.testing.assert_array_equal(distances_to(chain2, {0}), [0.0, np.inf])
