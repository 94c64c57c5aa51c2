class UsageError(RuntimeError):
    """An operation was called in a state or with inputs it does not accept."""


class ConfigError(ValueError):
    """Invalid configuration text or values."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
