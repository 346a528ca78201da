from typing import List, Optional


class RelnetError(Exception):
    """Base error; `exit_code` plays the role an HTTP status plays in a service."""

    exit_code = 1

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class DomainError(RelnetError, ValueError):
    exit_code = 2


class UnsupportedPatternError(DomainError):
    pass


class Diagnostic:
    def __init__(self, location: str, message: str, line: Optional[int] = None):
        self.location = location
        self.message = message
        self.line = line

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        return f"{where}{self.location}: {self.message}"

    def __repr__(self) -> str:
        return f"Diagnostic({self})"


class ConfigError(RelnetError):
    exit_code = 2

    def __init__(self, detail: str, diagnostics: Optional[List[Diagnostic]] = None):
        super().__init__(detail)
        self.diagnostics = diagnostics or []


class NumericalError(RelnetError):
    exit_code = 3


class ConvergenceError(NumericalError):
    pass
