"""Exception hierarchy shared by all bohmflow modules."""


class BohmflowError(Exception):
    """Base class for library errors."""


class NodeProximity(BohmflowError, ArithmeticError):
    """The density is below the floor where a velocity was requested.

    ``positions`` holds the offending x values when known.
    """

    def __init__(self, message, positions=None):
        super().__init__(message)
        self.positions = positions


class DomainError(BohmflowError, ValueError):
    """A finite-difference stencil left the evaluator's domain."""


class NodeOnGrid(BohmflowError, ArithmeticError):
    """A phase sweep crossed a grid point where the density vanishes."""


class BranchMismatch(BohmflowError, ArithmeticError):
    """Temporal phase alignment produced an increment of pi or more."""


class NodeEncounter(BohmflowError):
    """A trajectory ran into a node and step reduction could not clear it."""


class StepUnderflow(BohmflowError):
    """Adaptive step size fell below the minimum allowed."""


class SwarmFailure(BohmflowError):
    """Too few trajectories of a swarm completed."""


class DegenerateDensity(BohmflowError, ValueError):
    """A density has (numerically) zero mass on its domain."""


class ResolutionError(BohmflowError, ValueError):
    """A grid is too coarse to resolve the requested structure."""


class ConfigError(BohmflowError, ValueError):
    """Invalid run configuration. ``path`` is the dotted field path."""

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason
