"""
Exception hierarchy for pipefuse.

Two families map onto CLI exit codes: configuration/usage problems (exit 1)
and data problems (exit 2).
"""


class PipefuseError(Exception):
    """Base class for every error raised by pipefuse."""

    exit_code = 2


class ConfigError(PipefuseError, ValueError):
    """Invalid configuration value or config file."""

    exit_code = 1


class UsageError(PipefuseError, ValueError):
    """Bad command-line usage (unknown step, missing argument...)."""

    exit_code = 1


class DataError(PipefuseError):
    """Input data could not be used."""

    exit_code = 2


class FormatError(DataError, ValueError):
    """A file could not be parsed. Carries the path and, when known, the line."""

    def __init__(self, message: str, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{where}{message}")


class OutOfFrameError(DataError, ValueError):
    """A view box lies outside its frame beyond the clamp tolerance."""


class LabelConflictError(DataError, ValueError):
    """Per-view labels do not form a valid (1-B, n-C, n-D) group."""


class DepthDomainError(DataError, ValueError):
    """Negative radicand in the hyperbola depth formula."""


class ShapeError(DataError, ValueError):
    """Tensor or weight dimensions are inconsistent."""


class ParameterError(DataError, ValueError):
    """A numeric parameter is outside its valid range."""


class UnsupportedGeometryError(DataError, ValueError):
    """Pipeline inclined in both x and depth."""


class PlacementError(DataError, RuntimeError):
    """Scene generator could not place all pipelines without overlap."""
