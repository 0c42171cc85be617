"""
Error types.

This module defines the exceptions raised by the evaluation services.
Invalid arguments raise the builtin ValueError; the types below cover
failures that callers may want to tell apart.
"""
from typing import Optional


class ConfigError(ValueError):
    """A configuration value is unknown, malformed or violates an invariant."""

    def __init__(self, key: str, reason: str, line: Optional[int] = None):
        self.key = key
        self.line = line
        self.reason = reason
        where = f"{key} (line {line})" if line is not None else key
        super().__init__(f"{where}: {reason}")


class QuadratureError(RuntimeError):
    """Numerical integration did not meet the requested tolerance."""


class PrecisionLossError(ArithmeticError):
    """An alternating sum lost more precision than the tolerance allows."""
