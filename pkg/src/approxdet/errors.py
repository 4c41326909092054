"""Exception types shared across the package.

The CLI maps each class onto a distinct exit code, so callers can tell a
bad configuration from a malformed input file from an internal failure.
"""


class ConfigError(ValueError):
    """Invalid configuration: unknown setup name, out-of-range threshold, ..."""


class DataError(ValueError):
    """Malformed or contract-violating input data (files, tensors, records)."""


class ShapeError(ValueError):
    """Tensor shapes do not conform for the requested kernel."""
