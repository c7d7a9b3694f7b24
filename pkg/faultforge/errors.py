# Copyright (c), CommunityLogiq Software

"""
Exception hierarchy. Every error carries the process exit code the command
line front end reports for it.
"""

from typing import Any, Optional


class FaultForgeError(Exception):
    exit_code = 2


class ValidationError(FaultForgeError):
    exit_code = 1


class ConfigurationError(ValidationError):
    pass


class ScenarioValidationError(ValidationError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class ScenarioStateError(ValidationError):
    pass


class ScenarioMismatchError(ValidationError):
    pass


class CommandLineError(ValidationError):
    pass


class FaultFileError(ValidationError):
    def __init__(self, path: Any, reason: str, detail: str = ""):
        message = f"{path}: {reason}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)
        self.path = path
        self.reason = reason


class ModelFileError(ValidationError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class FaultLocationError(FaultForgeError):
    def __init__(self, column: int, message: str):
        super().__init__(f"fault column {column}: {message}")
        self.column = column


class EvaluationError(FaultForgeError):
    pass


class ReplayMismatchError(FaultForgeError):
    exit_code = 3

    def __init__(self, message: str, report: Optional[Any] = None):
        super().__init__(message)
        self.report = report


class FaultsExhausted(StopIteration):
    """Raised by the fault iterator once every fault group has been consumed"""
