"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numeric divergence with 3, and file-system trouble with 4.
"""


class LfisError(Exception):
    """Base class for package-specific errors."""


class ConfigError(LfisError):
    """A config file, CLI flag, or argument combination is invalid."""


class NumericsError(LfisError):
    """A computation produced non-finite values (training or transport diverged)."""


class CheckpointError(LfisError):
    """A checkpoint directory or manifest is missing, truncated, or inconsistent."""
