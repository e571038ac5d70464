"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 2 (argparse),
ValidationError/FormatError exit 3, NumericError exit 4.
"""


class RegiboxError(Exception):
    """Base class for all package errors."""


class ValidationError(RegiboxError):
    """Input data or configuration violates a documented invariant."""


class FormatError(RegiboxError):
    """A binary file is malformed, truncated, or of the wrong kind."""


class NumericError(RegiboxError):
    """A computation produced a non-finite or degenerate result."""
