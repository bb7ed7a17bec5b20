"""Exception types shared across the package."""


class SupportMismatchError(ValueError):
    """Two densities that must live on the same support do not."""


class ConfigError(ValueError):
    """Invalid or unsupported configuration (maps to CLI exit code 2)."""


class ModelError(ValueError):
    """Malformed game data, e.g. a transition row that does not sum to 1."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance (CLI exit code 3)."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
