"""
errors.py - exception hierarchy for the d4pm package.

Library code raises these; only `d4pm.cli` turns them into exit codes.
"""

#####################################
# Exit Codes
#####################################

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3

#####################################
# Exceptions
#####################################


class D4PMError(Exception):
    """Base class for all d4pm errors."""

    exit_code: int = EXIT_CHECK_FAILED


class ConfigError(D4PMError, ValueError):
    """Invalid parameter, configuration value or violated precondition."""

    exit_code = EXIT_USAGE


class DataFormatError(D4PMError):
    """Malformed, truncated or non-finite dataset file."""

    exit_code = EXIT_IO


class CheckpointError(D4PMError):
    """Checkpoint cannot be read back into the expected branch/shape."""

    exit_code = EXIT_IO


class TrainingDivergedError(D4PMError):
    """Loss became non-finite during optimization."""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(
            f"training diverged at epoch {epoch}, batch {batch}: loss={loss}"
        )
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


class SamplingError(D4PMError):
    """Reverse diffusion produced a non-finite state."""

    def __init__(self, step: int, what: str):
        super().__init__(f"non-finite {what} at diffusion step t={step}")
        self.step = step
        self.what = what


class OutputPathError(D4PMError):
    """Output location is missing or not writable."""

    exit_code = EXIT_IO


class CheckFailedError(D4PMError):
    """A verification check (e.g. oracle-check) did not pass."""

    exit_code = EXIT_CHECK_FAILED
