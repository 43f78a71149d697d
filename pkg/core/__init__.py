"""
Core model modules.

This package contains the fundamental components of the solver:
- The finite MDP model with its implicit cemetery state
- Stationary, deterministic, Markov and mixed strategies
- Support-graph analysis (reachability, closed classes, end components)

JSON documents live in core.documents, which also depends on processors.
"""

from .model import FiniteMdpModel, ConstrainedProblem, validate_model, make_stopping_mdp
from .strategies import (
    StationaryStrategy,
    DeterministicStrategy,
    MarkovStrategy,
    MixedStrategy,
    as_stationary,
)
from .graph_analysis import support_graph, maximal_end_components, almost_sure_absorbing

__all__ = [
    'FiniteMdpModel',
    'ConstrainedProblem',
    'validate_model',
    'make_stopping_mdp',
    'StationaryStrategy',
    'DeterministicStrategy',
    'MarkovStrategy',
    'MixedStrategy',
    'as_stationary',
    'support_graph',
    'maximal_end_components',
    'almost_sure_absorbing',
]
