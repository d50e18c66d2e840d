"""Exception hierarchy shared across the package."""


class FedGraphError(Exception):
    """Base class for all package errors."""


class ConfigError(FedGraphError, ValueError):
    """A configuration value is missing, malformed or out of range."""


class InfeasibleScenarioError(FedGraphError, ValueError):
    """A threat scenario cannot be planted with the requested graph size."""

    def __init__(self, scenario, message):
        self.scenario = scenario
        super().__init__(f"{scenario}: {message}")


class DatasetParseError(FedGraphError, ValueError):
    """A dataset file is malformed; carries file, line and field location."""

    def __init__(self, path, line, field, message):
        self.path = str(path)
        self.line = line
        self.field = field
        super().__init__(f"{path}:{line}: field {field!r}: {message}")


class DimensionError(FedGraphError, ValueError):
    """Array shapes are inconsistent with the model or graph layout."""


class UnknownNodeError(FedGraphError, KeyError):
    pass


class SplitError(FedGraphError, ValueError):
    """A stratum is too small to honour the requested split ratios."""


class DivergenceError(FedGraphError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None, client=None):
        self.epoch = epoch
        self.client = client
        super().__init__(message)


class ContractViolation(FedGraphError, ValueError):
    """An input violates a documented precondition."""


class RingOverflowError(FedGraphError, OverflowError):
    """A fixed-point value does not fit the secret-sharing ring."""


class IntegrityError(FedGraphError):
    """A ciphertext failed its integrity check on decryption."""


class MissingKeyError(FedGraphError, KeyError):
    pass
