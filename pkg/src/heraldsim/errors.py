"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """A configuration value failed validation.

    ``field`` names the offending key so command-line users can find it.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DispersionRangeError(ValueError):
    """Wavelength or temperature outside the dispersion model's validity range."""


class FitError(RuntimeError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message if residual is None else f"{message} (last residual {residual:.6g})")


class InsufficientCountsError(ValueError):
    """Raised when an estimator has no counts to work with."""


class UnsortedStreamError(ValueError):
    def __init__(self, channel, index):
        self.channel = channel
        self.index = index
        super().__init__(f"time tags on channel {channel} are not sorted at index {index}")
