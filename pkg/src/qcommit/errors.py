"""Exception hierarchy shared by every module."""


class QCommitError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(QCommitError, ValueError):
    """An operation received malformed or inconsistent input."""


class InvalidConfig(QCommitError, ValueError):
    """A protocol or experiment configuration cannot be executed."""


class ProtocolViolation(QCommitError, RuntimeError):
    """A role received a message out of order or in the wrong shape."""


class ResourceLimit(QCommitError, RuntimeError):
    """A requested simulation exceeds the desk-scale size cap."""
