"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent simulation configuration."""


class NumericalError(RuntimeError):
    """A numerical operation failed (singular system, exhausted redraws, ...)."""


class SingularChannelError(NumericalError):
    """Effective channel matrix is singular or too ill conditioned to invert.

    Carries the offending condition-number estimate when one is available.
    """

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition
