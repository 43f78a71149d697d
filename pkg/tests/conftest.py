"""
Shared fixtures: the worked-example models and seeded random-model factories.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add the repository root to the path (same idiom as the entry script)
REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT))

from core.model import ConstrainedProblem, FiniteMdpModel  # noqa: E402
from core.strategies import DeterministicStrategy, MixedStrategy, StationaryStrategy  # noqa: E402
from core.documents import parse_model  # noqa: E402

MODELS_DIR = REPO_ROOT / "models"


# ============================================================================
# WORKED EXAMPLES
# ============================================================================

@pytest.fixture
def models_dir() -> Path:
    return MODELS_DIR


@pytest.fixture
def twoact() -> FiniteMdpModel:
    """One state, two immediately absorbing actions; a is free but risky, b costs 1."""
    return FiniteMdpModel.from_arrays(
        ["s0"], [["a", "b"]], [[0.0], [0.0]],
        [[0.0, 1.0], [1.0, 0.0]], cost_names=["cost", "risk"],
    )


@pytest.fixture
def twoact_problem(twoact) -> ConstrainedProblem:
    return ConstrainedProblem(twoact, (0.5,))


@pytest.fixture
def chain2() -> FiniteMdpModel:
    """s0 -> s1 -> cemetery with costs 1 and 3."""
    return FiniteMdpModel.from_arrays(
        ["s0", "s1"], [["a"], ["a"]], [[0.0, 1.0], [0.0, 0.0]], [1.0, 3.0], cost_names=["cost"],
    )


@pytest.fixture
def geometric() -> FiniteMdpModel:
    """G(0.5): stay with probability 0.5, otherwise absorb."""
    return FiniteMdpModel.from_arrays(["s0"], [["a"]], [[0.5]], [1.0], cost_names=["cost"])


@pytest.fixture
def loop() -> FiniteMdpModel:
    """Zero-cost self-loop that never absorbs."""
    return FiniteMdpModel.from_arrays(["s0"], [["a"]], [[1.0]], [0.0], cost_names=["cost"])


@pytest.fixture
def loop_vs_stop() -> FiniteMdpModel:
    """a stays with probability 0.5, b absorbs immediately."""
    return FiniteMdpModel.from_arrays(
        ["s0"], [["a", "b"]], [[0.5], [0.0]], [1.0, 1.0], cost_names=["cost"],
    )


@pytest.fixture
def stopping_problem() -> ConstrainedProblem:
    return parse_model(MODELS_DIR / "stopping.json")


# ============================================================================
# RANDOM MODELS
# ============================================================================

def random_absorbing_model(rng: np.random.Generator, n_states: int, max_actions: int,
                           n_costs: int = 1, min_absorption: float = 0.1) -> FiniteMdpModel:
    """Dense kernel where every pair absorbs with probability at least min_absorption."""
    actions = [[f"a{k}" for k in range(int(rng.integers(1, max_actions + 1)))] for _ in range(n_states)]
    n_pairs = sum(len(acts) for acts in actions)
    absorption = rng.uniform(min_absorption, 0.5, size=n_pairs)
    kernel = rng.dirichlet(np.ones(n_states), size=n_pairs) * (1.0 - absorption)[:, None]
    costs = rng.uniform(0.1, 1.0, size=(n_costs, n_pairs))
    return FiniteMdpModel.from_arrays(
        [f"s{x}" for x in range(n_states)], actions, kernel, costs,
        cost_names=[f"r{j}" for j in range(n_costs)],
    )


def random_stationary(rng: np.random.Generator, model: FiniteMdpModel) -> StationaryStrategy:
    weights = np.zeros(model.n_pairs)
    for x in range(model.n_states):
        block = model.pairs_of(x)
        weights[block.start:block.stop] = rng.dirichlet(np.ones(len(block)))
    return StationaryStrategy(model, weights)


def random_selector(rng: np.random.Generator, model: FiniteMdpModel) -> DeterministicStrategy:
    return DeterministicStrategy(model, tuple(int(rng.integers(len(acts))) for acts in model.actions))


def random_mixture(rng: np.random.Generator, model: FiniteMdpModel, max_components: int = 3) -> MixedStrategy:
    count = int(rng.integers(1, max_components + 1))
    weights = rng.dirichlet(np.ones(count))
    return MixedStrategy.normalized([(w, random_selector(rng, model)) for w in weights])


@pytest.fixture
def make_model():
    return random_absorbing_model


@pytest.fixture
def make_stationary():
    return random_stationary


@pytest.fixture
def make_selector():
    return random_selector


@pytest.fixture
def make_mixture():
    return random_mixture
