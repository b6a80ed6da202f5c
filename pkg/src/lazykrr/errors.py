"""Exception types raised by lazykrr."""


class InputError(ValueError):
    """Malformed or inconsistent user input (shapes, ranges, dimensions)."""


class NumericalError(ArithmeticError):
    """A factorization failed even after jitter escalation."""

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class TrainingError(RuntimeError):
    """Non-finite gradients or losses during optimization."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ParseError(ValueError):
    """A table could not be parsed; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ArchiveError(ValueError):
    """A model archive is truncated, corrupt or of an unsupported version."""
