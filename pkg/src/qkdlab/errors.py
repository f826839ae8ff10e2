"""Exception types shared across the package."""


class ParamError(ValueError):
    """Invalid value for a named field of a parameter block."""

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class ConfigError(ValueError):
    """Scenario configuration failed to parse or validate."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}" if path else reason)
        self.path = path
        self.reason = reason


class CalibrationError(RuntimeError):
    """The calibration scan produced no clicks."""


class AttackUnavailable(RuntimeError):
    """An attack's precondition on Bob's hardware is not met."""

    def __init__(self, message: str, best_ratio: float | None = None):
        super().__init__(message)
        self.best_ratio = best_ratio
