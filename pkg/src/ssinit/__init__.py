"""Steady-state initialization of equation-based thermo-fluid plant models."""

from .eqsys import (FlatProblem, Model, Variable, Equation, Fix, Linear, DerivativeBalance,
                    Role, Phase, homotopy_combine, residual_eval, assemble_initialization_problem)
from .errors import (InitError, DomainError, EvaluationError, StructuralSingularityError,
                     ConvergenceError, HomotopyStalledError, VerificationError, BalanceError,
                     ConfigError, MappingError)

__version__ = "0.1.0"
