"""Exception types shared across the package.

Error categories map onto CLI exit codes: configuration and input problems
(ConfigError, DomainError, ParseError, QueryError) exit with status 2,
numeric failures (NumericError) with status 3.
"""


class HybridSslError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(HybridSslError, ValueError):
    """A configuration value or combination of values is invalid."""


class DomainError(HybridSslError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class ParseError(HybridSslError, ValueError):
    """A corpus or model file is malformed.

    Carries the 1-based line and column of the offending token when known.
    """

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class BoundsError(ParseError):
    """A feature id or class label is outside the declared dimensions."""


class NumericError(HybridSslError, RuntimeError):
    """A numeric procedure failed (non-convergence, NaN, overflow).

    ``snapshot`` holds whatever diagnostic state the caller attached,
    e.g. the last iterate of a line search or the parameters at the
    iteration where a NaN appeared.
    """

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot


class QueryError(HybridSslError, ValueError):
    """A result query cannot be answered from the available rows."""


class OracleError(HybridSslError, RuntimeError):
    """A test oracle could not produce a trustworthy reference value."""
