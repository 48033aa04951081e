class SeqReplayError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(SeqReplayError, ValueError):
    """Array shapes or population sizes do not fit together."""


class NumericError(SeqReplayError, ArithmeticError):
    """A non-finite value reached the dynamics."""


class ConfigError(SeqReplayError, ValueError):
    """A configuration value is missing, malformed or out of range."""
