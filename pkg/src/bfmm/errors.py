"""Exception hierarchy shared across the package."""


class FmmError(Exception):
    """Base class for every error raised by bfmm."""


class InvalidArgumentError(FmmError, ValueError):
    pass


class SamplingError(FmmError, RuntimeError):
    pass


class BoundaryDensityError(FmmError, ValueError):
    pass


class IngestionError(FmmError, ValueError):
    pass


class SchemaError(FmmError, ValueError):
    pass


class InitializationError(FmmError, ValueError):
    pass


class NumericalError(FmmError, FloatingPointError):
    pass
