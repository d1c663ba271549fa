"""Exception hierarchy shared by all modules."""


class InvalidInputError(ValueError):
    """Input data violates an operation's preconditions."""


class DegenerateInputError(InvalidInputError):
    """Input is silent or otherwise carries no usable signal."""


class DomainTagError(InvalidInputError):
    """Spectrogram is in the wrong (raw vs compressed) domain."""


class ConfigurationError(ValueError):
    """A configuration value is out of its valid range."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class NumericalError(ArithmeticError):
    """A computation produced or met non-finite / singular values."""


class ContractError(RuntimeError):
    """A pluggable component (e.g. a denoiser) broke its I/O contract."""


class CheckpointError(RuntimeError):
    pass


class ConfigMismatchError(CheckpointError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class ManifestError(ValueError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
