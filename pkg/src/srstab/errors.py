"""Exception taxonomy shared by all srstab modules."""


class SrstabError(Exception):
    """Base class for all srstab errors."""


class ChartDomainError(SrstabError):
    """A point lies outside the chart box of a frame."""


class ConfigurationError(SrstabError):
    """Bad system name, malformed definition file, or invalid job config."""


class EscapeError(SrstabError):
    """A trajectory left the chart box; carries the exit time."""

    def __init__(self, message, exit_time=None):
        super().__init__(message)
        self.exit_time = exit_time


class UnresolvedTargetError(SrstabError):
    """Shooting produced no residual-feasible candidate for a target."""


class ConnectivityError(SrstabError):
    """A grid-graph node is unreachable from the base node (h too coarse)."""


class FeedbackHoleError(SrstabError):
    """The feedback covector selector failed at a point."""


class StagnationError(SrstabError):
    """Closed-loop value failed to decay at the expected exponential rate."""
