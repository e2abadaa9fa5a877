"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class InitError(Exception):
    """Base class for every error raised by the package."""


class DomainError(InitError, ValueError):
    """An argument lies outside the domain of a model function."""


class EvaluationError(InitError, ArithmeticError):
    """A residual could not be evaluated to a finite number."""

    def __init__(self, message: str, equation: str | None = None, variable: str | None = None):
        super().__init__(message)
        self.equation = equation
        self.variable = variable


class StructuralSingularityError(InitError):
    """The equation system has no perfect matching or is not square."""

    def __init__(self, message: str, unmatched_equations=(), unmatched_variables=(), matching=None):
        super().__init__(message)
        self.unmatched_equations = list(unmatched_equations)
        self.unmatched_variables = list(unmatched_variables)
        self.matching = matching


class ConvergenceError(InitError):
    """Newton iteration failed to reach the requested tolerance."""

    def __init__(self, message: str, best=None, history=(), component: int | None = None,
                 equations=()):
        super().__init__(message)
        self.best = best
        self.history = list(history)
        self.component = component
        self.equations = list(equations)


class HomotopyStalledError(ConvergenceError):
    """The continuation step fell below its minimum."""

    def __init__(self, message: str, trace=None, lam: float | None = None):
        super().__init__(message)
        self.trace = trace
        self.lam = lam


class VerificationError(InitError):
    """The steady-state verification integration failed or drifted."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class BalanceError(InitError):
    """Boundary blocks would make the initialization problem non-square."""


class ConfigError(InitError):
    """A plant configuration file is malformed."""


class MappingError(InitError):
    """Two problems do not share the variables needed for a warm start."""

    def __init__(self, message: str, orphans=()):
        super().__init__(message)
        self.orphans = list(orphans)
