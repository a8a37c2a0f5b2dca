"""Exception types shared across the toolkit.

Every error raised intentionally by the library derives from ToolError,
so callers (and the command line driver) can separate domain failures
from programming mistakes.
"""


class ToolError(Exception):
    """Base class for all intentional toolkit failures."""


class SingularError(ToolError):
    """A matrix inverse was requested below the singularity threshold."""


class DomainError(ToolError):
    """A test function was evaluated where it is undefined."""


class SingularAtom(ToolError):
    """A measure operation required invertible atoms and found one that is not."""


class NotRankOne(ToolError):
    """Consecutive laminate atoms are not rank-one compatible."""


class BudgetExceeded(ToolError):
    """An oscillation or atom budget was exhausted."""


class InfeasibleLayer(ToolError):
    """A boundary transition layer cannot be built within the slope cap."""


class InfeasibleBarycenter(ToolError):
    """The requested barycenter lies outside the admissible hull."""


class NoAdmissibleSplit(ToolError):
    """No in-ball rank-one split exists; the envelope estimate is infinite."""


class NoFeasibleStart(ToolError):
    """No admissible starting deformation could be constructed."""


class Infeasible(ToolError):
    """A weight linear program has no feasible point."""


class Stalled(ToolError):
    """Column generation could not make a cell feasible."""


class UnknownEnergy(ToolError):
    """An energy name is not in the builtin registry."""


class HypothesisViolated(ToolError):
    """A certificate precondition fails structurally."""


class ConfigError(ToolError):
    """A scenario configuration is malformed or carries unknown keys."""
