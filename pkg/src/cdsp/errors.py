"""Exception types shared across the simulation chain."""


class DspError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DspError):
    """Invalid or inconsistent configuration value."""


class ShapeError(DspError):
    """Input arrays have a length or shape the operation cannot accept."""


class AliasingError(DspError):
    """Requested sample-rate change would fold the signal band."""


class SyncError(DspError):
    """Decided and reference symbol streams could not be aligned."""


class DelayRangeError(DspError):
    """A requested rail delay exceeds the supported range."""


class DegenerateSignalError(DspError):
    """A signal rail carries (almost) no power where power is required."""


class LockError(DspError):
    """Clock-recovery loop failed to settle.

    Carries the final fractional-interval variance for diagnostics.
    """

    def __init__(self, message, mu_variance=None):
        super().__init__(message)
        self.mu_variance = mu_variance


class EstimationError(DspError):
    """A monitor could not produce an estimate."""


class DivergenceError(DspError):
    """Adaptive filter tap energy ran away.

    Carries the tap-energy trace up to the point of divergence.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class FoeError(DspError):
    """Frequency-offset estimator found no usable spectral peak."""


class InsufficientDataError(DspError):
    """Not enough symbols or samples for a statistically valid result."""


class ScanError(DspError):
    """A delay-scan grid point failed.

    Carries the scan delay (seconds) at which the failure happened.
    """

    def __init__(self, message, tau=None):
        super().__init__(message)
        self.tau = tau


class StageError(DspError):
    """A scenario stage failed; wraps the original error with context."""

    def __init__(self, stage, config_hash, original):
        super().__init__(f"stage '{stage}' failed (config {config_hash}): {original}")
        self.stage = stage
        self.config_hash = config_hash
        self.original = original
