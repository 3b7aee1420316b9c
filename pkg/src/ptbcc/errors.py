"""Exception taxonomy shared by all modules.

Every error raised by the package derives from :class:`PtbccError`, so
callers (and the CLI) can catch one type and still report the concrete
failure class. Errors that originate from a specific input line carry a
``line`` attribute.
"""


class PtbccError(Exception):
    """Base class for all package errors."""


class FormatError(PtbccError):
    """Input file has a missing or malformed header."""


class EmptyInputError(PtbccError):
    """Input parsed fine but contained no data rows."""


class RowError(PtbccError):
    """A specific data row is malformed or inconsistent.

    Carries the 1-based line number of the offending row.
    """

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateAnnotationError(PtbccError):
    """The same (task, worker) pair was annotated more than once."""


class ClassUniverseError(PtbccError):
    """A label fell outside an explicitly given class universe."""


class InputError(PtbccError):
    """An operation received structurally invalid input."""


class HyperparameterError(PtbccError):
    """A hyperparameter violates its validity constraints."""


class DomainError(PtbccError):
    """A numeric argument is outside the mathematical domain."""


class NumericError(PtbccError):
    """A non-finite value appeared during computation."""


class EvaluationError(PtbccError):
    """An evaluation has no data to evaluate."""
