"""
Exception hierarchy for cogplay.

Every error carries the exit code the CLI reports for it:
2 validation failure, 3 statistical precondition failure, 4 I/O error.
"""
from typing import Optional


class CogplayError(Exception):
    """Base class for all cogplay errors."""

    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class LogValidationError(CogplayError):
    """A log file or trial record violates a format invariant."""

    exit_code = 2


class LogParseError(LogValidationError):
    """A serialized record could not be decoded."""

    def __init__(self, detail: str, line_number: int):
        super().__init__(f"line {line_number}: {detail}")
        self.line_number = line_number


class TrialNotFoundError(LogValidationError):
    """Requested trial index is not in the trial summary."""


class TaskRuleError(CogplayError):
    """A game rule was applied to an invalid state."""

    exit_code = 2


class NoResponseTimeError(TaskRuleError):
    """Timeout trials have no response time."""


class StatsPreconditionError(CogplayError):
    """Input data does not meet a statistic's preconditions."""

    exit_code = 3


class BayesFactorError(StatsPreconditionError):
    """Numerical integration of a Bayes factor did not converge."""

    def __init__(self, detail: str, abserr: Optional[float] = None, value: Optional[float] = None):
        super().__init__(f"{detail} (value={value}, abserr={abserr})")
        self.abserr = abserr
        self.value = value


class ArtifactIOError(CogplayError):
    """Missing input, unreadable config or failed write."""

    exit_code = 4


class StageError(CogplayError):
    """Wraps the error that aborted a pipeline stage."""

    def __init__(self, stage: str, cause: CogplayError):
        super().__init__(f"stage '{stage}' failed: {cause.detail}")
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code
