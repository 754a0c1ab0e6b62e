"""Exception hierarchy.

Two families matter to callers: ``ValidationError`` covers bad input
(CLI exit code 2), ``InternalInvariantError`` covers broken solver
invariants that indicate a bug rather than a bad instance (exit code 3).
"""


class SchedulerError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SchedulerError):
    """Invalid input: malformed JSON, bad instance data, bad arguments."""


class InternalInvariantError(SchedulerError):
    """A structural assumption of the solver was violated at runtime."""


# --- instance validation ---

class EmptyInstance(ValidationError):
    pass


class NonPositiveWork(ValidationError):
    pass


class EmptySpan(ValidationError):
    pass


class BadAlpha(ValidationError):
    pass


class DuplicateJobId(ValidationError):
    pass


class BadMachineCount(ValidationError):
    pass


# --- flow network ---

class NonPositiveSpeed(ValidationError):
    pass


class UnknownNode(ValidationError):
    pass


class FlowNotMaximum(InternalInvariantError):
    pass


# --- outer optimization loop ---

class InfeasibleAtUpperBound(InternalInvariantError):
    pass


class NoCriticalJobFound(InternalInvariantError):
    pass


class NegativeCapacity(InternalInvariantError):
    pass


class IterationGuardExceeded(InternalInvariantError):
    pass


# --- timetabling ---

class InfeasibleSpeeds(ValidationError):
    pass


class OverfullInterval(ValidationError):
    pass


class OversizeJobTime(ValidationError):
    pass


# --- energy-budget mode ---

class BadDeadline(ValidationError):
    pass


# --- reference oracles ---

class InstanceTooLarge(ValidationError):
    pass
