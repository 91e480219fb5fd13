"""Exception hierarchy.

Two families matter to callers: :class:`DataValidationError` for inputs that
are wrong (bad files, violated dataset premises, arguments outside a region)
and :class:`NumericalFailure` for computations that could not certify their
own accuracy. The CLI maps them to exit codes 1 and 2.
"""
from __future__ import annotations


class HeckeTraceError(Exception):
    """Base class for every error raised by ``hecke_trace``."""


class DataValidationError(HeckeTraceError, ValueError):
    pass


class FieldMismatchError(DataValidationError):
    pass


class SliceFormatError(DataValidationError):
    pass


class ClassificationError(DataValidationError):
    pass


class DatasetInvalidError(DataValidationError):
    pass


class RadiusInsufficientError(DataValidationError):
    """The slice radius cannot certify an answer; never a wrong answer."""


class AdmissibilityError(DataValidationError):
    pass


class ComparisonError(DataValidationError):
    pass


class NumericalFailure(HeckeTraceError, RuntimeError):
    pass


class QuadratureError(NumericalFailure):
    pass
