"""Tests for occupation measures, finiteness, repair, value equation and markovization."""

from collections import deque

import numpy as np
import pytest

from core.model import FiniteMdpModel
from core.strategies import (
    DeterministicStrategy,
    MarkovStrategy,
    MixedStrategy,
    StationaryStrategy,
    as_stationary,
)
from processors.occupancy import (
    FinitenessReport,
    FinitenessVerdict,
    ObjectiveVector,
    OccupationMeasure,
    ValueFunction,
    classify_finiteness,
    cost_vector,
    evaluate_value,
    flow_residual,
    induced_strategy,
    markovize_mixture,
    minimality_repair,
    mixture_step_marginals,
    occupation_from_distribution,
    occupation_of,
    occupation_of_markov,
    occupation_of_mixture,
    occupation_of_stationary,
    step_marginals,
    survival_probabilities,
    truncated_value,
)
from utils.errors import InfiniteOccupation, ModelValidationError, ShapeMismatch


def dirac(model, mapping):
    return as_stationary(DeterministicStrategy.from_mapping(model, mapping))


@pytest.fixture
def chain_with_orphan_loop():
    """CHAIN2 plus an unreachable self-loop state s2."""
    return FiniteMdpModel.from_arrays(
        ["s0", "s1", "s2"], [["a"], ["a"], ["a"]],
        [[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
        [1.0, 3.0, 1.0], cost_names=["cost"],
    )


# ============================================================================
# FINITENESS
# ============================================================================

class TestClassifyFiniteness:
    def test_loop_is_infinite(self, loop):
        report = classify_finiteness(loop, StationaryStrategy.uniform(loop))
        assert report.verdict is FinitenessVerdict.INFINITE
        assert report.witness == ("s0",)
        assert report.tail_mass is None

    def test_geometric_is_finite(self, geometric):
        report = classify_finiteness(geometric, StationaryStrategy.uniform(geometric), horizon=3)
        assert report.is_finite
        assert report.tail_mass == pytest.approx((0.5, 0.25, 0.125))

    def test_unreachable_closed_class_is_ignored(self, chain_with_orphan_loop):
        model = chain_with_orphan_loop
        report = classify_finiteness(model, StationaryStrategy.uniform(model))
        assert report.is_finite
        assert report.reachable == ("s0", "s1")

    def test_witness_is_closed_class_of_lowest_index(self):
        model = FiniteMdpModel.from_arrays(
            ["s0", "s1", "s2"], [["a"], ["a"], ["a"]],
            [[0.0, 0.5, 0.5], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [0.0, 0.0, 0.0],
        )
        report = classify_finiteness(model, StationaryStrategy.uniform(model))
        assert report.witness == ("s1",)

    def test_agrees_with_spectral_radius(self):
        """Finite exactly when the reachable transition matrix has spectral radius < 1."""
        rng = np.random.default_rng(11)
        finite_seen = infinite_seen = 0
        for _ in range(200):
            n_states = int(rng.integers(1, 6))
            actions = [[f"a{k}" for k in range(int(rng.integers(1, 4)))] for _ in range(n_states)]
            n_pairs = sum(len(a) for a in actions)
            kernel = np.zeros((n_pairs, n_states))
            for p in range(n_pairs):
                leak = 0.5 if rng.random() < 0.3 else 0.0
                support = rng.choice(n_states, size=min(n_states, int(rng.integers(1, 3))), replace=False)
                kernel[p, support] = (1.0 - leak) / len(support)
            model = FiniteMdpModel.from_arrays(
                [f"s{x}" for x in range(n_states)], actions, kernel, np.zeros(n_pairs))

            weights = np.zeros(n_pairs)
            for x in range(n_states):
                block = model.pairs_of(x)
                used = rng.choice(len(block), size=min(len(block), int(rng.integers(1, 3))), replace=False)
                weights[block.start + used] = 1.0 / len(used)
            sigma = StationaryStrategy(model, weights)

            transition = sigma.transition_matrix()
            reached = {model.initial}
            queue = deque([model.initial])
            while queue:
                x = queue.popleft()
                for y in np.nonzero(transition[x] > 0.0)[0]:
                    if int(y) not in reached:
                        reached.add(int(y))
                        queue.append(int(y))
            idx = sorted(reached)
            radius = max(abs(np.linalg.eigvals(transition[np.ix_(idx, idx)])))
            expected_finite = radius < 1.0 - 1e-10

            report = classify_finiteness(model, sigma)
            assert report.is_finite == expected_finite
            assert report.reachable == tuple(model.states[x] for x in idx)
            finite_seen += expected_finite
            infinite_seen += not expected_finite
        assert finite_seen > 0 and infinite_seen > 0

    def test_survival_probabilities(self, chain2):
        sigma = StationaryStrategy.uniform(chain2)
        np.testing.assert_allclose(survival_probabilities(chain2, sigma, 3), [1.0, 0.0, 0.0])


# ============================================================================
# OCCUPATION MEASURES
# ============================================================================

class TestOccupationOfStationary:
    def test_geometric(self, geometric):
        measure = occupation_of_stationary(geometric, StationaryStrategy.uniform(geometric))
        assert measure.entry("s0", "a") == pytest.approx(2.0)

    def test_chain_visits_each_state_once(self, chain2):
        measure = occupation_of_stationary(chain2, StationaryStrategy.uniform(chain2))
        np.testing.assert_allclose(measure.values, [1.0, 1.0])
        assert measure.total_mass == pytest.approx(2.0)

    def test_twoact_uniform_splits_by_kernel(self, twoact):
        measure = occupation_of_stationary(twoact, StationaryStrategy.uniform(twoact))
        np.testing.assert_allclose(measure.values, [0.5, 0.5])

    def test_infinite_strategy_returns_report(self, loop):
        result = occupation_of_stationary(loop, StationaryStrategy.uniform(loop))
        assert isinstance(result, FinitenessReport)
        assert not result.is_finite

    def test_from_sub_probability_distribution(self, geometric):
        sigma = StationaryStrategy.uniform(geometric)
        measure = occupation_from_distribution(geometric, sigma, np.array([0.25]))
        assert measure.entry("s0", "a") == pytest.approx(0.5)
        empty = occupation_from_distribution(geometric, sigma, np.zeros(1))
        assert empty.total_mass == 0.0

    def test_flow_balance_on_random_models(self, make_model, make_stationary):
        rng = np.random.default_rng(1)
        for _ in range(200):
            model = make_model(rng, int(rng.integers(1, 7)), 4)
            measure = occupation_of_stationary(model, make_stationary(rng, model))
            assert flow_residual(model, measure) <= 1e-9

    def test_induced_strategy_round_trip(self, make_model, make_stationary):
        rng = np.random.default_rng(2)
        for _ in range(200):
            model = make_model(rng, int(rng.integers(1, 7)), 4)
            measure = occupation_of_stationary(model, make_stationary(rng, model))
            again = occupation_of_stationary(model, induced_strategy(model, measure))
            assert measure.distance(again) <= 1e-8

    def test_negative_entries_rejected(self, twoact):
        with pytest.raises(ModelValidationError):
            OccupationMeasure(twoact, [1.0, -0.1])

    def test_shape_checked(self, twoact):
        with pytest.raises(ShapeMismatch):
            OccupationMeasure(twoact, [1.0])


class TestFlowResidual:
    def test_exact_measure_balances(self, chain2):
        measure = occupation_of_stationary(chain2, StationaryStrategy.uniform(chain2))
        assert flow_residual(chain2, measure) <= 1e-12

    def test_perturbation_shows_up_linearly(self, twoact):
        measure = OccupationMeasure(twoact, [0.5 + 1e-3, 0.5])
        assert flow_residual(twoact, measure) == pytest.approx(1e-3)

    def test_zero_table_misses_the_initial_mass(self, twoact):
        assert flow_residual(twoact, OccupationMeasure(twoact, [0.0, 0.0])) == pytest.approx(1.0)


class TestInducedStrategy:
    def test_ratio(self, twoact):
        sigma = induced_strategy(twoact, OccupationMeasure(twoact, [0.5, 0.5]))
        np.testing.assert_allclose(sigma.weights, [0.5, 0.5])

    def test_deterministic_measure_gives_its_selector(self, chain2):
        selector = DeterministicStrategy.lowest_index(chain2)
        measure = occupation_of_stationary(chain2, as_stationary(selector))
        np.testing.assert_array_equal(induced_strategy(chain2, measure).weights, [1.0, 1.0])

    def test_unvisited_states_use_default(self):
        model = FiniteMdpModel.from_arrays(
            ["s0", "s1"], [["a"], ["a", "b"]], [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]], [0.0, 0.0, 0.0])
        measure = OccupationMeasure(model, [1.0, 0.0, 0.0])
        sigma = induced_strategy(model, measure, default=DeterministicStrategy(model, (0, 1)))
        np.testing.assert_array_equal(sigma.row(1), [0.0, 1.0])


class TestMinimalityRepair:
    def test_strips_excess_on_unreachable_loop(self, chain_with_orphan_loop):
        model = chain_with_orphan_loop
        inflated = OccupationMeasure(model, [1.0, 1.0, 7.0])
        repaired = minimality_repair(model, inflated)
        np.testing.assert_allclose(repaired.values, [1.0, 1.0, 0.0])
        assert cost_vector(model, repaired).objective < cost_vector(model, inflated).objective

    def test_occupation_measure_is_a_fixed_point(self, make_model, make_stationary):
        rng = np.random.default_rng(3)
        for _ in range(20):
            model = make_model(rng, int(rng.integers(1, 5)), 3)
            measure = occupation_of_stationary(model, make_stationary(rng, model))
            assert minimality_repair(model, measure).distance(measure) <= 1e-9

    def test_repair_never_increases_costs(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n = int(rng.integers(2, 5))
            kernel = rng.dirichlet(np.ones(n + 1), size=n)[:, :n] * 0.9
            # Extra state looping on itself, unreachable from s0
            full = np.zeros((n + 1, n + 1))
            full[:n, :n] = kernel
            full[n, n] = 1.0
            costs = rng.uniform(0.1, 1.0, size=n + 1)
            model = FiniteMdpModel.from_arrays(
                [f"s{x}" for x in range(n)] + ["orphan"], [["a"]] * (n + 1), full, costs)
            exact = occupation_of_stationary(model, StationaryStrategy.uniform(model))
            values = np.array(exact.values)
            values[n] = rng.uniform(0.5, 5.0)
            inflated = OccupationMeasure(model, values)
            repaired = minimality_repair(model, inflated)
            assert np.all(repaired.values <= inflated.values + 1e-9)
            assert cost_vector(model, repaired).objective < cost_vector(model, inflated).objective

    def test_rejects_tables_that_do_not_balance(self, twoact):
        with pytest.raises(ModelValidationError):
            minimality_repair(twoact, OccupationMeasure(twoact, [0.2, 0.2]))


# ============================================================================
# VALUE EQUATION
# ============================================================================

class TestValueEquation:
    def test_geometric(self, geometric):
        value = evaluate_value(geometric, StationaryStrategy.uniform(geometric), [1.0])
        assert value.at("s0") == pytest.approx(2.0)

    def test_zero_source_gives_zero_value(self, chain2):
        value = evaluate_value(chain2, StationaryStrategy.uniform(chain2), [0.0, 0.0])
        np.testing.assert_array_equal(value.values, [0.0, 0.0])

    def test_chain(self, chain2):
        value = evaluate_value(chain2, StationaryStrategy.uniform(chain2), [1.0, 3.0])
        assert value.at("s0") == pytest.approx(4.0)
        assert value.at("s1") == pytest.approx(3.0)

    def test_rejects_non_absorbing_strategy(self, loop):
        with pytest.raises(InfiniteOccupation):
            evaluate_value(loop, StationaryStrategy.uniform(loop), [1.0])

    def test_matches_truncated_sums_and_is_unique(self, make_model, make_stationary):
        rng = np.random.default_rng(5)
        horizon = 200
        for _ in range(100):
            model = make_model(rng, int(rng.integers(1, 6)), 3)
            sigma = make_stationary(rng, model)
            f = rng.uniform(0.0, 2.0, size=model.n_states)
            value = evaluate_value(model, sigma, f)
            reachable = [model.state_index[s] for s in classify_finiteness(model, sigma).reachable]

            # Every row leaks at least 0.1, so the tail after N steps is below 0.9^N |v|
            partial = truncated_value(model, sigma, f, horizon)
            bound = 0.9 ** horizon * 10.0 * f.max() + 1e-9
            assert np.max(np.abs(partial[reachable] - value.values[reachable])) <= bound
            assert value.residual(sigma, f, reachable) <= 1e-9

            for x in reachable:
                shifted = np.array(value.values)
                shifted[x] += 1e-3
                assert ValueFunction(model, shifted).residual(sigma, f, reachable) > 1e-6


# ============================================================================
# MARKOV STRATEGIES AND MIXTURES
# ============================================================================

class TestMarkovOccupation:
    def test_empty_head_matches_stationary(self, geometric):
        sigma = StationaryStrategy.uniform(geometric)
        markov = occupation_of_markov(geometric, MarkovStrategy.stationary(sigma))
        assert markov.distance(occupation_of_stationary(geometric, sigma)) <= 1e-12

    def test_head_absorbs_before_tail_acts(self, twoact):
        strategy = MarkovStrategy((dirac(twoact, {"s0": "a"}),), dirac(twoact, {"s0": "b"}))
        measure = occupation_of_markov(twoact, strategy)
        np.testing.assert_allclose(measure.values, [1.0, 0.0])

    def test_infinite_tail_returns_report(self, loop):
        strategy = MarkovStrategy((), StationaryStrategy.uniform(loop))
        assert isinstance(occupation_of_markov(loop, strategy), FinitenessReport)

    def test_step_marginals(self, geometric):
        strategy = MarkovStrategy.stationary(StationaryStrategy.uniform(geometric))
        np.testing.assert_allclose(step_marginals(geometric, strategy, 3)[:, 0], [1.0, 0.5, 0.25])


class TestMixtures:
    def test_mixture_occupation_is_weighted_sum(self, loop_vs_stop):
        mixture = MixedStrategy((
            (0.5, DeterministicStrategy(loop_vs_stop, (0,))),
            (0.5, DeterministicStrategy(loop_vs_stop, (1,))),
        ))
        measure = occupation_of_mixture(loop_vs_stop, mixture)
        np.testing.assert_allclose(measure.values, [1.0, 0.5])

    def test_zero_weight_infinite_component_is_ignored(self):
        model = FiniteMdpModel.from_arrays(["s0"], [["stay", "go"]], [[1.0], [0.0]], [0.0, 1.0])
        finite = DeterministicStrategy(model, (1,))
        infinite = DeterministicStrategy(model, (0,))
        measure = occupation_of_mixture(model, MixedStrategy(((1.0, finite), (0.0, infinite))))
        np.testing.assert_allclose(measure.values, [0.0, 1.0])
        report = occupation_of_mixture(model, MixedStrategy(((0.5, finite), (0.5, infinite))))
        assert isinstance(report, FinitenessReport)

    def test_occupation_of_dispatches_on_strategy_class(self, twoact):
        selector = DeterministicStrategy(twoact, (1,))
        np.testing.assert_allclose(occupation_of(twoact, selector).values, [0.0, 1.0])
        with pytest.raises(TypeError):
            occupation_of(twoact, object())

    def test_markovize_first_step_uses_mixture_weights(self, twoact):
        mixture = MixedStrategy((
            (0.5, DeterministicStrategy(twoact, (0,))),
            (0.5, DeterministicStrategy(twoact, (1,))),
        ))
        markov = markovize_mixture(twoact, mixture, 1)
        np.testing.assert_allclose(markov.head[0].weights, [0.5, 0.5])

    def test_markovize_follows_surviving_components(self, loop_vs_stop):
        mixture = MixedStrategy((
            (0.5, DeterministicStrategy(loop_vs_stop, (0,))),
            (0.5, DeterministicStrategy(loop_vs_stop, (1,))),
        ))
        markov = markovize_mixture(loop_vs_stop, mixture, 2)
        np.testing.assert_allclose(markov.head[1].weights, [1.0, 0.0])
        measure = occupation_of_markov(loop_vs_stop, markov)
        np.testing.assert_allclose(measure.values, [1.0, 0.5])

    def test_single_component_is_dirac_everywhere(self, chain2):
        selector = DeterministicStrategy.lowest_index(chain2)
        markov = markovize_mixture(chain2, MixedStrategy(((1.0, selector),)), 3)
        for kernel in markov.head + (markov.tail,):
            np.testing.assert_array_equal(kernel.weights, [1.0, 1.0])

    def test_step_tail_rule_repeats_last_kernel(self, loop_vs_stop):
        mixture = MixedStrategy((
            (0.5, DeterministicStrategy(loop_vs_stop, (0,))),
            (0.5, DeterministicStrategy(loop_vs_stop, (1,))),
        ))
        markov = markovize_mixture(loop_vs_stop, mixture, 2, tail_rule="step")
        assert markov.tail is markov.head[-1]

    def test_markovize_rejects_bad_arguments(self, twoact, loop):
        mixture = MixedStrategy(((1.0, DeterministicStrategy(twoact, (0,))),))
        with pytest.raises(ValueError):
            markovize_mixture(twoact, mixture, 0)
        with pytest.raises(ValueError):
            markovize_mixture(twoact, mixture, 2, tail_rule="other")
        with pytest.raises(InfiniteOccupation):
            markovize_mixture(loop, MixedStrategy(((1.0, DeterministicStrategy(loop, (0,))),)), 2)

    def test_markovization_replicates_marginals_and_occupation(self, make_model, make_mixture):
        rng = np.random.default_rng(8)
        horizon = 20
        for _ in range(20):
            model = make_model(rng, int(rng.integers(1, 5)), 3)
            mixture = make_mixture(rng, model)
            markov = markovize_mixture(model, mixture, horizon)

            expected = mixture_step_marginals(model, mixture, horizon)
            actual = step_marginals(model, markov, horizon)
            assert np.max(np.abs(expected - actual)) <= 1e-10

            combined = occupation_of_mixture(model, mixture)
            assert occupation_of_markov(model, markov).distance(combined) <= 1e-8


class TestCostVector:
    def test_zero_measure(self, twoact):
        assert cost_vector(twoact, OccupationMeasure(twoact, [0.0, 0.0])).values == (0.0, 0.0)

    def test_twoact_optimum(self, twoact):
        vector = cost_vector(twoact, OccupationMeasure(twoact, [0.5, 0.5]))
        assert vector.values == pytest.approx((0.5, 0.5))
        assert vector.satisfies((0.5,))
        assert not vector.satisfies((0.4,))

    def test_affine_in_the_measure(self, make_model, make_stationary):
        rng = np.random.default_rng(9)
        model = make_model(rng, 4, 3, n_costs=3)
        first = occupation_of_stationary(model, make_stationary(rng, model))
        second = occupation_of_stationary(model, make_stationary(rng, model))
        alpha = 0.3
        mixed = OccupationMeasure.combination([(alpha, first), (1.0 - alpha, second)])
        expected = alpha * cost_vector(model, first) + (1.0 - alpha) * cost_vector(model, second)
        np.testing.assert_allclose(cost_vector(model, mixed).as_array(), expected.as_array())

    def test_vector_arithmetic(self):
        total = ObjectiveVector((1.0, 2.0)) + 2.0 * ObjectiveVector((0.5, 0.5))
        assert total.values == (2.0, 3.0)
        assert total.objective == 2.0
        assert total.constraints == (3.0,)
