"""Exception hierarchy shared across the package."""


class CateMinimaxError(Exception):
    """Base class for all package errors."""


class ConfigError(CateMinimaxError, ValueError):
    """Invalid or inconsistent configuration."""


class ConstructionError(ConfigError):
    """A lower-bound configuration violates its validity constraints."""


class NumericalGuardError(CateMinimaxError, ArithmeticError):
    """A matrix failed an eigenvalue guard or a fit degenerated."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SingularMatrixError(NumericalGuardError):
    """Smallest eigenvalue (or singular value) fell below the configured floor."""


class DegenerateFitError(NumericalGuardError):
    """No usable observations (e.g. an empty kernel window)."""
