"""Exception types shared across the package."""


class CoalesceError(Exception):
    """Base class for all package-specific errors."""


class ParameterOutOfRange(CoalesceError):
    pass


class ZeroMean(CoalesceError):
    pass


class InfeasibleDegreeSequence(CoalesceError):
    pass


class NotConnectedAfterRetries(CoalesceError):
    pass


class TooLargeForExact(CoalesceError):
    pass


class NotConnected(CoalesceError):
    pass


class TotalUnitOnIrregular(CoalesceError):
    pass


class BadSubset(CoalesceError):
    pass


class NotTransitive(CoalesceError):
    pass


class SameVertex(CoalesceError):
    pass


class EmptySamples(CoalesceError):
    pass


class KTooLarge(CoalesceError):
    pass


class MissingPsi(CoalesceError):
    pass


class DegenerateDepth(CoalesceError):
    pass


class NonpositiveTime(CoalesceError):
    pass


class ConfigError(CoalesceError):
    """Raised on invalid experiment configuration; message names the field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class TaskError(CoalesceError):
    """Raised when an experiment task fails; message names the task."""

    def __init__(self, task, message):
        self.task = task
        super().__init__(f"task {task!r}: {message}")
