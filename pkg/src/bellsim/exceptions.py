"""Exception types raised by the bellsim package."""


class BellSimError(Exception):
    """Base class for all bellsim errors."""


class ConfigurationError(BellSimError, ValueError):
    """Raised for invalid run configuration, parameters or scheme weights."""


class InsufficientDataError(BellSimError):
    """Raised when an estimator has no events for a settings pair."""

    def __init__(self, pair_label: str, message: str | None = None):
        self.pair_label = pair_label
        super().__init__(message or f"No events recorded for settings pair {pair_label}")
