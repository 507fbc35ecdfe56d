"""Exception hierarchy shared across the package."""


class TifCtrError(Exception):
    """Base class for every error raised by tifctr."""


class ConfigurationError(TifCtrError):
    """Invalid shapes, specs or experiment configuration."""


class DataError(TifCtrError):
    """Bad input data: labels, indices, day indices, empty sets."""


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TrainingError(TifCtrError):
    """Non-finite values encountered while training."""


class MetricUndefinedError(TifCtrError):
    """A metric cannot be computed for the given input (e.g. single-class AUC)."""


class InternalError(TifCtrError):
    pass
