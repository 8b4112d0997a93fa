"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so pipeline code should
raise the most specific type that applies.
"""


class GbmdError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(GbmdError):
    """Invalid or inconsistent run configuration."""

    exit_code = 2


class DataError(GbmdError):
    """Unreadable, malformed, or degenerate input data."""

    exit_code = 3


class NumericError(GbmdError):
    """Numerical failure: divergence, non-finite state, broken invariant."""

    exit_code = 4


class EstimatorError(DataError):
    """A statistical estimator cannot be computed on the given sample."""


class OracleFailure(GbmdError):
    """One or more built-in oracle checks failed."""

    exit_code = 5
