"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: ConfigError -> 1,
DataError -> 2, NumericalError -> 3. Library code raises them directly;
plain ValueError is reserved for programming errors (bad arguments to
pure functions).
"""


class SleddynError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SleddynError):
    """Invalid configuration, schema, or command usage."""


class DataError(SleddynError):
    """Malformed or inconsistent input data (CSV rows, tables, runs)."""


class NumericalError(SleddynError):
    """A numerical procedure failed (rank deficiency, no convergence)."""
