"""Exception types raised across the package."""

from __future__ import annotations


class UtrefError(Exception):
    """Base class for all errors raised by utref."""


class ParseError(UtrefError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class NotATestFile(UtrefError):
    """Source parsed fine but declares no @Test / @ParameterizedTest method."""


class MergeConflict(UtrefError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"two units define a method named {name!r}")


class RuleValidationError(UtrefError):
    def __init__(self, smell: str, reason: str):
        self.smell = smell
        self.reason = reason
        super().__init__(f"rule {smell}: {reason}")


class MissingRule(UtrefError):
    def __init__(self, smell: str):
        self.smell = smell
        super().__init__(f"no rule available for smell {smell}")


class DivisionByEmpty(UtrefError, ZeroDivisionError):
    """Reduction rate requested with an empty 'before' population."""


class NotMechanizable(UtrefError):
    def __init__(self, finding, reason: str):
        self.finding = finding
        self.reason = reason
        smell = getattr(getattr(finding, "smell", None), "value", finding)
        super().__init__(f"{smell}: {reason}")


class BackendUnavailable(UtrefError):
    pass


class ResponseUnparseable(UtrefError):
    def __init__(self, round_no: int):
        self.round = round_no
        super().__init__(f"round {round_no}: no code could be extracted from the model response")


class BackendError(UtrefError):
    """Base for chat-completion transport failures."""


class Timeout(BackendError):
    pass


class HttpError(BackendError):
    def __init__(self, status: int | None, message: str = ""):
        self.status = status
        super().__init__(f"HTTP {status if status is not None else 'unreachable'}: {message}")


class RateLimited(HttpError):
    def __init__(self, message: str = ""):
        super().__init__(429, message)


class AuthError(HttpError):
    pass


class HookFailed(UtrefError):
    def __init__(self, file: str, exit_code: int):
        self.file = file
        self.exit_code = exit_code
        super().__init__(f"{file}: hook exited with {exit_code}")
