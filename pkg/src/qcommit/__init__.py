"""Simulator and security-game harness for a quantum bit commitment
protocol built on secret unitary transforms."""

__version__ = "0.1.0"

from .errors import (
    InvalidArgument,
    InvalidConfig,
    ProtocolViolation,
    QCommitError,
    ResourceLimit,
)

__all__ = [
    "__version__",
    "InvalidArgument",
    "InvalidConfig",
    "ProtocolViolation",
    "QCommitError",
    "ResourceLimit",
]
