"""Exception types raised across qusum. All derive from builtin exceptions
so callers can keep catching ``ValueError`` / ``RuntimeError``.
"""


class InvariantError(ValueError):
    """A value violates the invariants of its type (Hermiticity, trace,
    positivity, normalisation)."""


class DimensionError(ValueError):
    """Operator dimensions or outcome alphabets do not agree."""


class ConfigError(ValueError):
    """Scenario configuration failed validation."""

    def __init__(self, message: str, key: str = None, line: int = None) -> None:
        self.key = key
        self.line = line
        where = ""
        if line is not None:
            where += "line {}: ".format(line)
        if key is not None:
            where += "{}: ".format(key)
        super().__init__(where + message)


class UndetectableChangeError(ValueError):
    """The post-change distribution cannot be told apart from the
    pre-change one by the statistic in use (non-positive drift)."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""


class CensoringError(RuntimeError):
    """Too many Monte Carlo runs were truncated at the run-length cap."""
