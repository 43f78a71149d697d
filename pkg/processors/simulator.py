"""
Seeded Monte Carlo simulation of strategies.

Trajectory i draws from numpy's generator seeded with (seed, i), so a report
depends only on (model, strategy, N, seed, step cap) and never on the number
of worker threads. Trajectories are processed in fixed-size chunks whose
partial moments are merged in chunk order.
"""

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from core.model import FiniteMdpModel
from core.strategies import (
    DeterministicStrategy,
    MarkovStrategy,
    MixedStrategy,
    StationaryStrategy,
)
from utils.constants import (
    DEFAULT_SEED,
    DEFAULT_STEP_CAP,
    DEFAULT_TRAJECTORIES,
    DEFAULT_WORKERS,
    SIMULATION_CHUNK_SIZE,
    ZERO_ERROR_MATCH_TOLERANCE,
)
from utils.errors import ShapeMismatch
from utils.logging_config import get_logger
from .occupancy import OccupationMeasure

logger = get_logger(__name__)

Strategy = Union[DeterministicStrategy, StationaryStrategy, MarkovStrategy, MixedStrategy]


@dataclass(frozen=True, eq=False)
class SimulationReport:
    """
    Empirical statistics of N simulated trajectories.

    Attributes:
        model: The simulated model
        n_trajectories: N
        seed: Base seed
        step_cap: Decision cap per trajectory
        occupation_mean: Mean visit count of every pair
        occupation_stderr: Standard error of occupation_mean
        cost_mean: Mean accumulated cost per cost table
        cost_stderr: Standard error of cost_mean
        marginal_mean: Mean visit count of every state
        marginal_stderr: Standard error of marginal_mean
        length_histogram: Decisions before absorption -> trajectory count
        capped: Trajectories stopped by the step cap
    """
    model: FiniteMdpModel
    n_trajectories: int
    seed: int
    step_cap: int
    occupation_mean: np.ndarray
    occupation_stderr: np.ndarray
    cost_mean: np.ndarray
    cost_stderr: np.ndarray
    marginal_mean: np.ndarray
    marginal_stderr: np.ndarray
    length_histogram: Dict[int, int]
    capped: int

    def empirical_occupation(self) -> OccupationMeasure:
        return OccupationMeasure(self.model, self.occupation_mean)

    @classmethod
    def from_occupation(cls, measure: OccupationMeasure) -> 'SimulationReport':
        """Degenerate report carrying an analytic measure with zero standard errors."""
        model = measure.model
        return cls(
            model=model,
            n_trajectories=1,
            seed=DEFAULT_SEED,
            step_cap=DEFAULT_STEP_CAP,
            occupation_mean=np.array(measure.values),
            occupation_stderr=np.zeros(model.n_pairs),
            cost_mean=model.costs @ measure.values,
            cost_stderr=np.zeros(model.n_costs),
            marginal_mean=measure.marginal,
            marginal_stderr=np.zeros(model.n_states),
            length_histogram={},
            capped=0,
        )


@dataclass
class _Moments:
    """Count, mean and sum of squared deviations of per-trajectory statistics."""
    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, samples: np.ndarray) -> '_Moments':
        mean = samples.mean(axis=0)
        return cls(samples.shape[0], mean, ((samples - mean) ** 2).sum(axis=0))

    def merge(self, other: '_Moments') -> '_Moments':
        """Pairwise update of two disjoint sample sets."""
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / count)
        m2 = self.m2 + other.m2 + delta ** 2 * (self.count * other.count / count)
        return _Moments(count, mean, m2)

    def stderr(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.mean)
        return np.sqrt(np.maximum(self.m2, 0.0) / (self.count - 1) / self.count)


@dataclass
class _ChunkTotals:
    """Moments of per-trajectory statistics over one chunk."""
    visits: _Moments
    costs: _Moments
    states: _Moments
    lengths: Dict[int, int]
    capped: int


def _cumulative(weights: np.ndarray, model: FiniteMdpModel) -> List[np.ndarray]:
    return [np.cumsum(weights[model.offsets[x]:model.offsets[x + 1]]) for x in range(model.n_states)]


class TrajectorySimulator:
    """Samples trajectories of one strategy on one model."""

    def __init__(self, model: FiniteMdpModel, strategy: Strategy,
                 step_cap: int = DEFAULT_STEP_CAP, workers: int = DEFAULT_WORKERS):
        """
        Initialize the simulator.

        Args:
            model: The model
            strategy: Deterministic, stationary, Markov or mixed strategy
            step_cap: Maximum number of decisions per trajectory
            workers: Number of threads processing chunks

        Raises:
            ValueError: If step_cap < 1 or the strategy type is unsupported
        """
        if step_cap < 1:
            raise ValueError(f"Step cap must be at least 1, got {step_cap}")
        model.require_same_shape(strategy.model, "Strategy")
        self.model = model
        self.strategy = strategy
        self.step_cap = int(step_cap)
        self.workers = max(1, int(workers))

        self._transitions = np.cumsum(model.kernel, axis=1)
        self._mixture_cdf: Optional[np.ndarray] = None
        self._components: List[np.ndarray] = []
        self._head: List[List[np.ndarray]] = []
        self._tail: List[np.ndarray] = []
        if isinstance(strategy, MixedStrategy):
            self._mixture_cdf = np.cumsum(strategy.weights)
            self._components = [s.pair_indices() for s in strategy.selectors]
        elif isinstance(strategy, DeterministicStrategy):
            self._components = [strategy.pair_indices()]
        elif isinstance(strategy, StationaryStrategy):
            self._tail = _cumulative(strategy.weights, model)
        elif isinstance(strategy, MarkovStrategy):
            self._head = [_cumulative(k.weights, model) for k in strategy.head]
            self._tail = _cumulative(strategy.tail.weights, model)
        else:
            raise ValueError(f"Unsupported strategy type: {type(strategy).__name__}")

    def _choose(self, rng: np.random.Generator, x: int, step: int,
                selector: Optional[np.ndarray]) -> int:
        if selector is not None:
            return int(selector[x])
        rows = self._head[step - 1] if step <= len(self._head) else self._tail
        row = rows[x]
        a = int(np.searchsorted(row, rng.random(), side='right'))
        if a >= len(row):
            # Rounding left the draw above the last partial sum
            a = int(np.nonzero(np.diff(row, prepend=0.0) > 0.0)[0][-1])
        return self.model.offsets[x] + a

    def run_trajectory(self, rng: np.random.Generator) -> Tuple[np.ndarray, int, bool]:
        """
        Sample one trajectory.

        Returns:
            (pair visit counts, number of decisions, whether the cap was hit)
        """
        model = self.model
        selector = None
        if self._mixture_cdf is not None:
            l = int(np.searchsorted(self._mixture_cdf, rng.random(), side='right'))
            selector = self._components[min(l, len(self._components) - 1)]
        elif self._components:
            selector = self._components[0]

        visits = np.zeros(model.n_pairs)
        x = model.initial
        for step in range(1, self.step_cap + 1):
            p = self._choose(rng, x, step, selector)
            visits[p] += 1.0
            y = int(np.searchsorted(self._transitions[p], rng.random(), side='right'))
            if y >= model.n_states:
                return visits, step, False
            x = y
        return visits, self.step_cap, True

    def _run_chunk(self, seed: int, start: int, stop: int) -> _ChunkTotals:
        model = self.model
        visits = np.zeros((stop - start, model.n_pairs))
        lengths: Dict[int, int] = {}
        capped = 0
        for row, i in enumerate(range(start, stop)):
            rng = np.random.default_rng([seed, i])
            visits[row], length, hit_cap = self.run_trajectory(rng)
            if hit_cap:
                capped += 1
            else:
                lengths[length] = lengths.get(length, 0) + 1
        costs = visits @ model.costs.T
        states = visits @ model.incidence.T
        return _ChunkTotals(
            visits=_Moments.of(visits), costs=_Moments.of(costs), states=_Moments.of(states),
            lengths=lengths, capped=capped,
        )

    def simulate(self, n_trajectories: int = DEFAULT_TRAJECTORIES,
                 seed: int = DEFAULT_SEED) -> SimulationReport:
        """
        Simulate N trajectories and aggregate their statistics.

        Args:
            n_trajectories: Number of trajectories N (>= 1)
            seed: Base seed of the per-trajectory streams

        Returns:
            SimulationReport
        """
        if n_trajectories < 1:
            raise ValueError(f"Need at least one trajectory, got {n_trajectories}")
        bounds = [(start, min(start + SIMULATION_CHUNK_SIZE, n_trajectories))
                  for start in range(0, n_trajectories, SIMULATION_CHUNK_SIZE)]
        logger.info(f"Simulating {n_trajectories} trajectories in {len(bounds)} chunks "
                    f"({self.workers} workers, seed {seed})")

        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            chunks = list(executor.map(lambda b: self._run_chunk(seed, *b), bounds))

        n = n_trajectories
        lengths: Dict[int, int] = {}
        for chunk in chunks:
            for length, count in chunk.lengths.items():
                lengths[length] = lengths.get(length, 0) + count
        capped = sum(chunk.capped for chunk in chunks)
        if capped:
            logger.warning(f"{capped} of {n} trajectories hit the step cap of {self.step_cap}")

        def mean_and_stderr(name: str) -> Tuple[np.ndarray, np.ndarray]:
            moments = functools.reduce(_Moments.merge, (getattr(c, name) for c in chunks))
            return moments.mean, moments.stderr()

        occupation_mean, occupation_stderr = mean_and_stderr('visits')
        cost_mean, cost_stderr = mean_and_stderr('costs')
        marginal_mean, marginal_stderr = mean_and_stderr('states')
        return SimulationReport(
            model=self.model,
            n_trajectories=n,
            seed=seed,
            step_cap=self.step_cap,
            occupation_mean=occupation_mean,
            occupation_stderr=occupation_stderr,
            cost_mean=cost_mean,
            cost_stderr=cost_stderr,
            marginal_mean=marginal_mean,
            marginal_stderr=marginal_stderr,
            length_histogram=dict(sorted(lengths.items())),
            capped=capped,
        )


def simulate(model: FiniteMdpModel, strategy: Strategy, n_trajectories: int = DEFAULT_TRAJECTORIES,
             seed: int = DEFAULT_SEED, step_cap: int = DEFAULT_STEP_CAP,
             workers: int = DEFAULT_WORKERS) -> SimulationReport:
    """
    Simulate a strategy and report empirical occupation and cost statistics.

    Mixed strategies draw their component once per trajectory, before the
    first decision.

    Example:
        >>> report = simulate(geometric, as_stationary(DeterministicStrategy.lowest_index(geometric)),
        ...                   100000, seed=42)
        >>> abs(report.marginal_mean[0] - 2.0) < 4 * report.marginal_stderr[0]
        True
    """
    return TrajectorySimulator(model, strategy, step_cap, workers).simulate(n_trajectories, seed)


def compare_empirical(report: SimulationReport, measure: OccupationMeasure) -> float:
    """
    Largest absolute z-score between a report and an analytic occupation measure.

    Entries with zero standard error count as z = 0 when they match within
    1e-12 and as infinite otherwise.

    Raises:
        ShapeMismatch: If the report and measure are over different models
    """
    if not report.model.same_shape(measure.model):
        raise ShapeMismatch("Simulation report and occupation measure are over different models")
    gap = report.occupation_mean - measure.values
    stderr = report.occupation_stderr
    exact = stderr == 0.0
    z = np.zeros_like(gap)
    z[~exact] = np.abs(gap[~exact]) / stderr[~exact]
    z[exact & (np.abs(gap) > ZERO_ERROR_MATCH_TOLERANCE)] = math.inf
    worst = float(np.max(z, initial=0.0))
    logger.info(f"Largest |z| against the analytic measure: {worst:.4g}")
    return worst


__all__ = [
    'SimulationReport',
    'TrajectorySimulator',
    'simulate',
    'compare_empirical',
]
