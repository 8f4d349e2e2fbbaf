"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SilossError(Exception):
    exit_code = 1


class DomainError(SilossError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class InputFormatError(SilossError, ValueError):
    exit_code = 2

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
            if line is not None:
                where += f"{line}:"
            where += " "
        super().__init__(where + message)


class InsufficientDataError(SilossError, ValueError):
    exit_code = 2


class ExtrapolationError(SilossError, ValueError):
    exit_code = 2


class NonDecayingTraceError(SilossError):
    exit_code = 3


class BudgetInconsistencyError(SilossError):
    """Parasitic losses add up to more than the measured loss."""

    exit_code = 4


class OptimizationError(SilossError):
    """Inner hopping-range minimization could not bracket a minimum."""

    exit_code = 5

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class FitEvaluationError(SilossError):
    exit_code = 5

    def __init__(self, message, index=None, point=None):
        self.index = index
        self.point = point
        super().__init__(message)


class IntegrationError(SilossError):
    exit_code = 5
