"""Exception types shared across the package."""


class PopfluxError(ValueError):
    """Base class for all popflux input/contract errors."""


class InputError(PopfluxError):
    """Malformed or out-of-range input data."""


class OutOfExtentError(PopfluxError):
    """A planar point falls outside the spatial scheme extent."""


class SchemeMismatchError(PopfluxError):
    """Two artifacts were computed under incompatible partitioning schemes."""


class ConstantSeriesError(PopfluxError):
    """A statistic is undefined because an input vector is constant."""


class ModelError(PopfluxError):
    """The estimation model cannot produce a defined posterior."""
