"""Exception hierarchy shared across the package."""

from __future__ import annotations


class IppsError(Exception):
    """Base class for all errors raised by this package."""


class InstanceError(IppsError):
    """The instance data or job-graph structure is malformed."""


class CrossRegionLinkError(InstanceError):
    """An edge crosses an alternative-branch boundary illegally.

    Either an AND edge enters a conditional branch from outside it, or a
    branch connects out other than by merging (with every sibling branch)
    at a join node.
    """


class CombinationExplosionError(IppsError):
    """A job's alternative-routing combinations exceed the supported cap."""

    def __init__(self, job_id: int, cap: int, message: str | None = None):
        self.job_id = job_id
        self.cap = cap
        super().__init__(message or f"job {job_id}: more than {cap} combinations")


class IllegalActionError(IppsError):
    """An action was submitted that is not in the current action space."""


class DeadStateError(IppsError):
    """Unfinished operations remain but nothing is running or schedulable.

    Only reachable with a malformed instance; valid instances always admit
    progress.
    """


class ScheduleFormatError(IppsError):
    """A serialized schedule could not be interpreted."""


class InfeasibleScheduleError(IppsError):
    """An operation expected a feasible schedule and got violations."""

    def __init__(self, message: str, violations=()):
        self.violations = tuple(violations)
        super().__init__(message)


class ReplayError(IppsError):
    """A schedule could not be replayed as environment decisions."""


class OracleLimitError(IppsError):
    """The instance exceeds the exhaustive search envelope."""


class GenerationError(IppsError):
    """The instance generator exhausted its retry budget."""


class ProtocolError(IppsError):
    """A wire-protocol message violated the session rules."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)
