"""Exception hierarchy.

Errors fall in two families so the CLI can map them onto exit codes:
``ModelError`` for problems with a model or configuration description and
``DataError`` for problems with observed counts. ``NoConvergence`` is kept
separate because it carries a usable (if unconverged) result.
"""

from __future__ import annotations


class SVError(Exception):
    """Base class for every error raised by svexact."""


class ModelError(SVError):
    pass


class DataError(SVError):
    pass


class EmptyCellSet(ModelError):
    pass


class CellLimitExceeded(ModelError):
    pass


class WeightMismatch(ModelError):
    pass


class InconsistentTau(ModelError):
    pass


class UnsupportedPattern(ModelError):
    pass


class DataKindMismatch(ModelError):
    pass


class UnknownCell(ModelError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownCellLabel(DataError):
    def __init__(self, labels):
        self.labels = list(labels)
        super().__init__("unknown cell label(s): " + ", ".join(self.labels))


class NegativeCount(DataError):
    pass


class AllZeroData(DataError):
    pass


class EmptyFiberStart(DataError):
    pass


class SupportViolation(DataError):
    pass


class InfeasibleTotal(DataError):
    pass


class SizeLimit(SVError):
    pass


class NoConvergence(SVError):
    """Raised by the fitter; ``fitted`` holds the best iterate reached."""

    def __init__(self, message: str, fitted=None):
        super().__init__(message)
        self.fitted = fitted
