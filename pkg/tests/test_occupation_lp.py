"""Tests for the occupation LP, vertex enumeration and the MPS writer."""

import io

import numpy as np
import pytest

from core.model import ConstrainedProblem, FiniteMdpModel
from processors.decomposer import enumerate_deterministic
from processors.occupancy import occupation_of_stationary
from processors.occupation_lp import build_occupation_lp, enumerate_vertices, write_mps
from processors.simplex import simplex_solve
from core.strategies import as_stationary
from utils.errors import ModelValidationError, UnboundedPolytope


@pytest.fixture
def twoact_single_cost():
    return FiniteMdpModel.from_arrays(["s0"], [["a", "b"]], [[0.0], [0.0]], [0.0, 1.0])


class TestBuildOccupationLp:
    def test_dimensions_and_labels(self, twoact_problem):
        lp = build_occupation_lp(twoact_problem)
        assert (lp.n_columns, lp.n_equalities, lp.n_inequalities) == (2, 1, 1)
        assert lp.column_labels == (("s0", "a"), ("s0", "b"))
        assert lp.row_labels == ("flow:s0", "cost:risk")

    def test_flow_rows(self, chain2):
        lp = build_occupation_lp(ConstrainedProblem(chain2))
        np.testing.assert_array_equal(lp.a_eq, [[1.0, 0.0], [-1.0, 1.0]])
        np.testing.assert_array_equal(lp.b_eq, [1.0, 0.0])

    def test_twoact_optimum(self, twoact_problem):
        solution = simplex_solve(build_occupation_lp(twoact_problem))
        assert solution.objective == pytest.approx(0.5)
        np.testing.assert_allclose(solution.values, [0.5, 0.5], atol=1e-9)

    def test_geometric_optimum(self, geometric):
        solution = simplex_solve(build_occupation_lp(ConstrainedProblem(geometric)))
        assert solution.objective == pytest.approx(2.0)


class TestEnumerateVertices:
    def test_twoact_vertices(self, twoact_single_cost):
        found = enumerate_vertices(build_occupation_lp(ConstrainedProblem(twoact_single_cost)))
        assert not found.truncated
        assert sorted(tuple(v) for v in found.vertices) == [(0.0, 1.0), (1.0, 0.0)]

    def test_chain_has_a_single_vertex(self, chain2):
        found = enumerate_vertices(build_occupation_lp(ConstrainedProblem(chain2)))
        assert len(found.vertices) == 1
        np.testing.assert_allclose(found.vertices[0], [1.0, 1.0])

    def test_loop_is_unbounded(self, loop):
        with pytest.raises(UnboundedPolytope):
            enumerate_vertices(build_occupation_lp(ConstrainedProblem(loop)))

    def test_inequalities_are_rejected(self, twoact_problem):
        with pytest.raises(ModelValidationError):
            enumerate_vertices(build_occupation_lp(twoact_problem))

    def test_limit_truncates(self, twoact_single_cost):
        found = enumerate_vertices(build_occupation_lp(ConstrainedProblem(twoact_single_cost)), limit=1)
        assert found.truncated
        assert len(found.vertices) == 1

    def test_limit_equal_to_the_vertex_count_is_complete(self, twoact_single_cost, chain2):
        found = enumerate_vertices(build_occupation_lp(ConstrainedProblem(twoact_single_cost)), limit=2)
        assert not found.truncated
        assert len(found.vertices) == 2
        assert not enumerate_vertices(build_occupation_lp(ConstrainedProblem(chain2)), limit=1).truncated

    def test_vertices_are_deterministic_occupations(self, make_model):
        rng = np.random.default_rng(31)
        for _ in range(50):
            model = make_model(rng, int(rng.integers(1, 5)), 3)
            vertices = enumerate_vertices(build_occupation_lp(ConstrainedProblem(model))).vertices
            deterministic = [
                occupation_of_stationary(model, as_stationary(e.selector)).values
                for e in enumerate_deterministic(model)
            ]
            assert len(vertices) == len(deterministic)
            for vertex in vertices:
                assert min(np.max(np.abs(vertex - d)) for d in deterministic) <= 1e-7
            for point in deterministic:
                assert min(np.max(np.abs(point - v)) for v in vertices) <= 1e-7


def test_write_mps(twoact_problem):
    stream = io.StringIO()
    write_mps(build_occupation_lp(twoact_problem), stream)
    lines = stream.getvalue().splitlines()

    assert lines[0].split() == ["NAME", "OCCLP"]
    assert "* X1 = ('s0', 'b')" in lines
    assert " E  F0" in lines
    assert " L  C0" in lines
    assert lines[-1] == "ENDATA"

    columns = lines.index("COLUMNS")
    rhs = lines.index("RHS")
    entries = [line.split() for line in lines[columns + 1:rhs]]
    assert ["X0", "F0", "1"] in entries
    assert ["X0", "C0", "1"] in entries
    assert ["X1", "COST", "1"] in entries
    assert all(entry[1] != "COST" for entry in entries if entry[0] == "X0")
    assert [line.split() for line in lines[rhs + 1:-1]] == [["RHS", "F0", "1"], ["RHS", "C0", "0.5"]]
