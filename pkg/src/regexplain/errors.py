"""Exception types shared across the package."""


class ConformanceError(ValueError):
    """Two objects that must agree in shape or pairing do not."""


class ValidationError(ValueError):
    """A value or configuration violates its documented constraints."""


class RangeError(ValueError):
    """A requested count or index exceeds what the data can supply."""


class DatasetFormatError(ValueError):
    """A dataset file could not be parsed; the message names the line."""


class DataIntegrityError(ValueError):
    """File contents violate a consistency property they promise to hold."""


class SamplingError(RuntimeError):
    """Not enough candidates to draw the requested sample."""


class TrainingError(RuntimeError):
    """A training loop diverged or produced a non-finite loss."""


class NumericError(RuntimeError):
    """A numeric computation produced non-finite values."""


class CoverageError(ValueError):
    """A required explanation or artifact is missing for some graph."""


class UndefinedMetricError(ValueError):
    """The metric is undefined for the given inputs (e.g. one-class AUC)."""
