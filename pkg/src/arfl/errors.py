class ArflError(Exception):
    pass


class ConfigError(ArflError, ValueError):
    pass


class DimensionError(ArflError, ValueError):
    pass


class ContractError(ArflError, ValueError):
    pass


class ParseError(ArflError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ArflError, ValueError):
    pass


class UndefinedMetricError(ArflError, ValueError):
    pass


class ComparisonError(ArflError, ValueError):
    pass


class TrainingError(ArflError, RuntimeError):
    """Raised when the training objective stops being finite."""

    def __init__(self, epoch, batch, loss):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f"non-finite objective {loss!r} at epoch {epoch}, batch {batch}")
