"""Exception types raised across the package."""


class DualAlignError(Exception):
    pass


class DimensionError(DualAlignError, ValueError):
    pass


class InvalidSpec(DualAlignError, ValueError):
    pass


class InvalidParams(DualAlignError, ValueError):
    pass


class InsufficientData(DualAlignError, ValueError):
    pass


class UnsupportedKernel(DualAlignError, ValueError):
    pass


class ConfigError(DualAlignError):
    """Invalid experiment configuration; ``line`` points into the source file when known."""

    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
