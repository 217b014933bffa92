"""Exception hierarchy shared across the package.

Every error raised on purpose derives from :class:`SteergenError` and carries a
stable ``code`` string that the CLI and the HTTP layer map to exit codes and
response bodies.
"""

from __future__ import annotations


class SteergenError(Exception):
    """Base class for all deliberate package errors."""

    code = "error"


class DomainError(SteergenError):
    """Invalid ids, lengths, or values passed to an operation."""

    code = "domain"


class AlphabetError(SteergenError):
    """A control-state letter outside the configured alphabet."""

    code = "alphabet"

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class RegexSyntaxError(SteergenError):
    """Malformed constraint expression (unbalanced parens, dangling operator)."""

    code = "syntax"

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class GraphError(SteergenError):
    """Structurally invalid node-link constraint graph."""

    code = "graph"


class SchemaError(SteergenError):
    """Table field not present in the model's schema."""

    code = "schema"


class NumericalError(SteergenError):
    """Non-finite values encountered where finite math was required."""

    code = "numerical"


class AlignmentError(SteergenError):
    """Text not derivable from any known rendering template."""

    code = "alignment"


class IoError(SteergenError):
    """File could not be read or written."""

    code = "io"


class FormatError(SteergenError):
    """File was readable but its contents do not follow the documented format."""

    code = "format"


class NoFeasibleOutput(SteergenError):
    """No hypothesis could finish within the length budget under the constraint."""

    code = "no_feasible_output"


class ConstraintViolation(SteergenError):
    """A forced prefix is not a valid path through the active constraint."""

    code = "constraint_violation"


class CompatibilityError(SteergenError):
    """Checkpoint or bundle written by an incompatible version or corrupted."""

    code = "compatibility"


class ExportError(SteergenError):
    """Bundle cannot be produced (e.g. the constraint accepts nothing)."""

    code = "export"


class RangeTooLarge(SteergenError):
    """Cartesian product of range values exceeds the configured cap."""

    code = "range_too_large"
