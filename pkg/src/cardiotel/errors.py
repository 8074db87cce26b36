"""Exception hierarchy shared across the package.

Each error maps onto a stable wire code (``wire_code``) and a CLI exit
status (``exit_code``) so scripted callers can branch on failures.
"""


class CardiotelError(Exception):
    wire_code = "error"
    exit_code = 1


class ValidationError(CardiotelError):
    """Malformed input: bad path, bad value, invariant violation."""

    wire_code = "validation"
    exit_code = 2


class ParseError(ValidationError):
    """Unparseable file content; carries row/column context when known."""

    def __init__(self, message, row=None, column=None):
        if row is not None:
            message = f"{message} (row {row}" + (f", column {column})" if column else ")")
        super().__init__(message)
        self.row = row
        self.column = column


class PairingError(CardiotelError):
    """Kit/clinic reading sets that cannot be paired up."""

    wire_code = "validation"
    exit_code = 3


class ConflictError(CardiotelError):
    """Uniqueness violation (duplicate email, duplicate reading)."""

    wire_code = "conflict"
    exit_code = 2


class AuthError(CardiotelError):
    """Invalid, expired or unauthorized credential."""

    wire_code = "auth"
    exit_code = 1


class NotFoundError(CardiotelError):
    wire_code = "not_found"
    exit_code = 1


class OverflowClosed(CardiotelError):
    """Subscription dropped because the consumer fell too far behind."""

    wire_code = "overflow"
    exit_code = 1


class ExtractionError(CardiotelError):
    """Waveform feature extraction failed (no detectable beat)."""

    wire_code = "validation"
    exit_code = 2


class ConfigError(CardiotelError):
    wire_code = "validation"
    exit_code = 2


class OrchestrationError(CardiotelError):
    """A demo/orchestration stage failed; carries the stage name."""

    exit_code = 5

    def __init__(self, stage, message):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage
