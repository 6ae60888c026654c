"""Exception types shared across the package.

The hierarchy mirrors how the command line reports failures: anything
rooted at ValidationError is a problem with inputs or configuration,
OSError covers file system trouble, and NumericError covers
factorizations or iterations that fail on valid input.
"""


class ValidationError(ValueError):
    """Invalid values, configuration, or data semantics."""


class ShapeError(ValidationError):
    """Array dimensions are missing, mismatched, or out of range."""


class ParseError(ValidationError):
    """Text input could not be parsed; message names row and column."""


class FormatError(ValidationError):
    """Binary or structured input violates its format contract."""


class NumericError(RuntimeError):
    """A numerical routine failed on otherwise valid input."""
