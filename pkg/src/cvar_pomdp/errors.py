"""Typed error categories shared across the package.

Each category carries a short ``category`` string used by the CLI to pick an
exit code.
"""


class CvarPomdpError(Exception):
    category = "error"
    exit_code = 1


class InvalidInputError(CvarPomdpError, ValueError):
    category = "invalid-input"
    exit_code = 2


class DegenerateBeliefError(CvarPomdpError, RuntimeError):
    """All posterior particle weights vanished after a reweighting step."""

    category = "degenerate-belief"
    exit_code = 3

    def __init__(self, message: str, trajectory: int | None = None, step: int | None = None):
        super().__init__(message)
        self.trajectory = trajectory
        self.step = step


class TableQualityError(CvarPomdpError, RuntimeError):
    category = "table-quality"
    exit_code = 4


class ConfigError(CvarPomdpError, ValueError):
    category = "config"
    exit_code = 5


class SizeError(CvarPomdpError, ValueError):
    """Exhaustive enumeration would exceed the allowed outcome budget."""

    category = "size"
    exit_code = 6
