"""Exception hierarchy shared across the library.

The CLI maps these onto exit codes (see cli.py): config problems -> 2,
data/artifact problems -> 3, numeric/training failures -> 4.
"""


class IrfadError(Exception):
    """Base class for all library errors."""


class ParameterError(IrfadError, ValueError):
    """An argument is outside its documented domain."""


class ShapeError(IrfadError, ValueError):
    """Array shapes are incompatible for the requested operation."""


class NumericError(IrfadError, ArithmeticError):
    """Non-finite values entered a computation that requires finite input."""


class ContractError(IrfadError):
    """An internal API contract was violated (e.g. non-scalar loss root)."""


class TrainingDivergedError(NumericError):
    """Training produced a non-finite loss or parameters."""

    def __init__(self, epoch: int, detail: str = ""):
        self.epoch = epoch
        msg = f"training diverged at epoch {epoch}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class CheckpointError(IrfadError):
    """Base class for checkpoint load failures."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is not supported."""


class ScheduleMismatchError(CheckpointError):
    """Checkpoint was trained under a different noise schedule."""


class CorruptCheckpointError(CheckpointError):
    """Checkpoint file is truncated or otherwise unreadable."""


class DataError(IrfadError):
    """Dataset files are missing, corrupt, or violate dataset invariants."""


class UndefinedMetricError(IrfadError, ValueError):
    """The requested metric is undefined for the given inputs."""


class ConfigError(IrfadError):
    """Run configuration is invalid (unknown key, bad value, missing path)."""
