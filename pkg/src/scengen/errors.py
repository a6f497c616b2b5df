"""Exception hierarchy shared by the library and the command line."""


class ScengenError(Exception):
    """Base class for every error raised by scengen."""

    exit_code = 1


class MonitorError(ScengenError):
    """Invalid monitor definition (bad domain, nondeterminism, dangling state...)."""


class MonitorContractError(MonitorError):
    """A black-box monitor broke its contract while being explored."""


class NoTracesError(ScengenError):
    """The initial state is unsafe: the monitor entails no infinite trace."""

    exit_code = 3


class ResourceLimitError(ScengenError):
    """An exploration or table-size limit was exceeded."""

    exit_code = 4

    def __init__(self, message, *, limit=None, requested=None):
        super().__init__(message)
        self.limit = limit
        self.requested = requested


class IndexOutOfBoundsError(ScengenError, IndexError):
    exit_code = 2


class InvalidPrefixError(ScengenError, ValueError):
    """A trace prefix is not a computation of the generator."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FormatError(ScengenError):
    """Unreadable or incompatible serialized file."""
