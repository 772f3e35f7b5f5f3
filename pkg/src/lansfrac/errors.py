"""Exception types shared across the package."""


class LansfracError(Exception):
    """Base class for all package errors."""


class GridError(LansfracError):
    """Invalid torus discretization (odd N, too few modes, bad dimension)."""


class MeanModeError(LansfracError):
    """Negative Stokes power requested on a field with nonzero mean mode."""


class InconsistentPairError(LansfracError):
    """(u, v) handed to the v-form right-hand side do not satisfy v = (1 + a^2 A) u."""


class DivergedError(LansfracError):
    """Time integration produced non-finite values or unbounded growth."""

    def __init__(self, message: str, step: int | None = None, t: float | None = None):
        super().__init__(message)
        self.step = step
        self.t = t


class NoContractionError(LansfracError):
    """Picard increments failed to decrease repeatedly; data too large for the fixed point."""


class ConfigError(LansfracError):
    """Problem with a run configuration file or its values."""


class MissingKeyError(ConfigError):
    def __init__(self, key: str):
        super().__init__(f"missing required config key: {key}")
        self.key = key


class BadValueError(ConfigError):
    def __init__(self, key: str, line: int, detail: str):
        super().__init__(f"bad value for '{key}' (line {line}): {detail}")
        self.key = key
        self.line = line


class RegimeViolationError(ConfigError):
    """Requested operation needs a fractional order outside the admissible range."""


class SnapshotError(LansfracError):
    """Problem reading or writing a binary snapshot."""


class BadMagicError(SnapshotError):
    pass


class VersionMismatchError(SnapshotError):
    pass


class CorruptPayloadError(SnapshotError):
    pass


class EmptyOutputError(LansfracError):
    """CSV emission called with nothing to write."""
