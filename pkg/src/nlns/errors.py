"""Exception types shared across the toolkit."""


class NlnsError(Exception):
    """Base class for all toolkit errors."""


class ParseError(NlnsError):
    """Malformed instance text."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)
        self.position = position


class UnsupportedFeatureError(ParseError):
    """Input is well formed but uses a feature outside this toolkit's scope."""


class ConfigError(NlnsError):
    """Invalid solver, benchmark, or training configuration."""


class CapacityError(NlnsError):
    """Instance exceeds a model's maximum sequence length."""


class ModelFormatError(NlnsError):
    """Corrupt, truncated, or incompatible model file."""


class TrainingFault(NlnsError):
    """Non-finite loss or gradient encountered during training."""
