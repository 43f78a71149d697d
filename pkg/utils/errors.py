"""
Exception hierarchy for the constrained MDP solver.

Validation problems derive from ValueError, numerical trouble from
ArithmeticError, so callers that only know the builtin families still
catch them. The CLI maps each family to one exit code.
"""

from typing import FrozenSet, Optional, Tuple


class CmixError(Exception):
    """Base class for all solver errors."""


# ============================================================================
# VALIDATION ERRORS (exit code 4)
# ============================================================================

class ModelValidationError(CmixError, ValueError):
    """Input data violates a model, strategy or document invariant."""


class RowSumExceedsOne(ModelValidationError):
    """A transition row sums to more than 1."""


class NegativeProbability(ModelValidationError):
    """A transition probability is negative beyond the clamp tolerance."""


class NegativeCost(ModelValidationError):
    """A cost entry is negative."""


class NonFiniteValue(ModelValidationError):
    """A cost, bound or probability is NaN or infinite."""


class UnknownStateReference(ModelValidationError):
    """A state identifier is not declared in the model."""


class UnknownActionReference(ModelValidationError):
    """An action identifier is not available at the referenced state."""


class EmptyActionSet(ModelValidationError):
    """A state has no actions."""


class DuplicateIdentifier(ModelValidationError):
    """A state, action, cost name or transition entry is declared twice."""


class ActionNameClash(ModelValidationError):
    """The base model already uses the STOP identifier."""


class InvalidStrategy(ModelValidationError):
    """A strategy kernel or mixture violates its invariants."""


class ShapeMismatch(ModelValidationError):
    """Two objects built over different models were combined."""


class TooManySelectors(ModelValidationError):
    """Deterministic enumeration exceeds its guard."""


class UnboundedPolytope(ModelValidationError):
    """The flow polytope has a recession direction (an end component)."""


class ParseError(ModelValidationError):
    """A document could not be parsed."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        context = []
        if line is not None:
            context.append(f"line {line}")
        if key:
            context.append(f"key '{key}'")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)


class InfiniteOccupation(ModelValidationError):
    """An operation required a strategy with finite occupation measure."""

    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


# ============================================================================
# PROBLEM-LEVEL OUTCOMES (exit codes 2 and 3)
# ============================================================================

class InfeasibleProblem(CmixError):
    """No strategy satisfies the constraints."""


class AssumptionViolated(CmixError):
    """A reachable all-zero-cost end component exists."""

    def __init__(self, message: str, witness: Optional[FrozenSet[Tuple[str, str]]] = None):
        self.witness = witness
        super().__init__(message)


# ============================================================================
# NUMERICAL FAILURES (exit code 5)
# ============================================================================

class NumericalFailure(CmixError, ArithmeticError):
    """Internal numerical trouble; never expected on valid input."""


class SingularSystem(NumericalFailure):
    """The graph classifier and the linear algebra disagree."""


class IterationLimit(NumericalFailure):
    """The simplex pivot cap was hit."""


class NonConvergent(NumericalFailure):
    """Value iteration hit its sweep cap."""


class RepairFailed(NumericalFailure):
    """A flow-feasible table induced a strategy with infinite occupation."""


class EmptyCandidatePool(NumericalFailure):
    """No deterministic strategy with finite occupation was found."""
