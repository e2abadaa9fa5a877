"""Flat equation-system representation of an initialization problem.

Residuals are plain Python callables ``fn(v) -> float`` that read variables
through an evaluation context ``v`` (``v["name"]``) and express homotopy
simplifications with ``v.hom(actual, simplified)``, where both arguments are
zero-argument callables.  Only the branch needed at the current lambda is
evaluated, so tracing the reads of a residual at lambda=0 yields the
simplified incidence and at an interior lambda the full incidence.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import DomainError, EvaluationError, StructuralSingularityError

log = logging.getLogger(__name__)

SIMPLIFIED = "simplified"
FULL = "full"
_TRACE_LAMBDA = {SIMPLIFIED: 0.0, FULL: 0.5}


class Role(str, enum.Enum):
    STATE = "state"
    ALGEBRAIC = "algebraic"
    FIXED = "fixed-parameter"
    UNKNOWN_PARAMETER = "unknown-parameter"


class Phase(str, enum.Enum):
    INITIAL = "initial-only"
    SIMULATION = "simulation-only"
    BOTH = "both"


@dataclass
class Variable:
    name: str
    nominal: float = 1.0
    start: float = 0.0
    min: float = -math.inf
    max: float = math.inf
    role: Role = Role.ALGEBRAIC
    unit: str = ""
    kind: str = ""
    der_of: str | None = None
    value: float | None = None

    def __post_init__(self):
        self.role = Role(self.role)
        if not self.nominal > 0:
            raise DomainError(f"{self.name}: nominal must be positive")
        if self.role is Role.FIXED:
            if self.value is None:
                raise DomainError(f"{self.name}: fixed parameter needs a value")
            self.start = self.value
        if not self.min <= self.start <= self.max:
            raise DomainError(f"{self.name}: start {self.start} outside [{self.min}, {self.max}]")


def homotopy_combine(actual: float, simplified: float, lam: float) -> float:
    """Blend ``lam * actual + (1 - lam) * simplified`` for lam in [0, 1]."""
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"homotopy parameter {lam} outside [0, 1]")
    if lam == 1.0:
        return actual
    if lam == 0.0:
        return simplified
    return lam * actual + (1.0 - lam) * simplified


@dataclass(frozen=True)
class HomotopyPair:
    actual: Callable[[], float]
    simplified: Callable[[], float]

    def evaluate(self, lam: float) -> float:
        if lam == 1.0:
            return self.actual()
        if lam == 0.0:
            return self.simplified()
        return homotopy_combine(self.actual(), self.simplified(), lam)


def _value(x):
    return x() if callable(x) else x


class Context:
    """Variable accessor handed to residual functions."""

    __slots__ = ("vals", "slot", "lam")

    def __init__(self, vals: list, slot: Mapping[str, int], lam: float = 1.0):
        self.vals = vals
        self.slot = slot
        self.lam = lam

    def __getitem__(self, name: str) -> float:
        return self.vals[self.slot[name]]

    def hom(self, actual, simplified) -> float:
        lam = self.lam
        if lam == 1.0:
            return _value(actual)
        if lam == 0.0:
            return _value(simplified)
        return homotopy_combine(_value(actual), _value(simplified), lam)


class TraceContext(Context):
    """Context that records which unknowns a residual reads."""

    __slots__ = ("n", "seen")

    def __init__(self, vals, slot, lam, n):
        super().__init__(vals, slot, lam)
        self.n = n
        self.seen: set[int] = set()

    def __getitem__(self, name):
        k = self.slot[name]
        if k < self.n:
            self.seen.add(k)
        return self.vals[k]


class Equation:
    """A scalar residual ``fn(v) = 0``."""

    form = "general"

    def __init__(self, name: str, fn: Callable[[Context], float], phase: Phase = Phase.BOTH,
                 nominal: float = 1.0):
        if not nominal > 0:
            raise DomainError(f"{name}: residual nominal must be positive")
        self.name = name
        self.fn = fn
        self.phase = Phase(phase)
        self.nominal = nominal

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class Fix(Equation):
    """``var = value`` where value is a number or a function of lambda."""

    form = "fix"

    def __init__(self, name, var: str, value, phase=Phase.BOTH, nominal=1.0):
        self.var = var
        self.value = value
        if callable(value):
            def fn(v, var=var, value=value):
                return v[var] - value(v.lam)
        else:
            def fn(v, var=var, value=float(value)):
                return v[var] - value
        super().__init__(name, fn, phase, nominal)


class Linear(Equation):
    """``sum(coef * var) + const = 0`` with constant coefficients."""

    form = "linear"

    def __init__(self, name, terms: Mapping[str, float], const: float = 0.0,
                 phase=Phase.BOTH, nominal=1.0):
        self.terms = dict(terms)
        self.const = float(const)
        items = tuple(self.terms.items())

        def fn(v, items=items, c=self.const):
            s = c
            for var, a in items:
                s += a * v[var]
            return s

        super().__init__(name, fn, phase, nominal)


class DerivativeBalance(Equation):
    """``target = sum(coef_k(v) * der_k)`` for state-derivative unknowns ``der_k``.

    When every ``der_k`` is known to be zero the equation collapses to
    ``target = 0``; this is the elimination chain that removes the dummy
    derivatives from steady-state problems.
    """

    form = "derivative"

    def __init__(self, name, target: str, terms: Sequence[tuple[Callable, str]],
                 phase=Phase.BOTH, nominal=1.0):
        self.target = target
        self.terms = tuple(terms)

        def fn(v, target=target, terms=self.terms):
            s = v[target]
            for coef, der in terms:
                d = v[der]
                if d != 0.0:
                    s -= coef(v) * d
            return s

        super().__init__(name, fn, phase, nominal)

    def trace_fn(self, v):
        s = v[self.target]
        for coef, der in self.terms:
            s -= coef(v) * v[der]
        return s


class Model:
    """Flattened plant: all variables and equations of every phase."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: dict[str, Variable] = {}
        self.equations: list[Equation] = []
        self.meta: dict = {}
        self.scenario = None

    def add_variable(self, var: Variable) -> Variable:
        if var.name in self.variables:
            raise DomainError(f"duplicate variable {var.name}")
        self.variables[var.name] = var
        return var

    def var(self, name, **kw) -> str:
        self.add_variable(Variable(name, **kw))
        return name

    def add_equation(self, eq: Equation) -> Equation:
        self.equations.append(eq)
        return eq

    def add(self, eqs: Iterable[Equation]):
        for eq in eqs:
            self.add_equation(eq)

    def states(self) -> list[Variable]:
        return [v for v in self.variables.values() if v.role is Role.STATE]

    def derivative_of(self) -> dict[str, str]:
        return {v.der_of: v.name for v in self.variables.values() if v.der_of}

    def remove_equation(self, name: str) -> Equation:
        for i, eq in enumerate(self.equations):
            if eq.name == name:
                return self.equations.pop(i)
        raise KeyError(name)


def _is_zero(c) -> bool:
    return not callable(c) and c == 0.0


def _combine(parts, scale):
    """Return ``scale * sum(parts)`` as a float or a function of lambda."""
    if any(callable(p) for p in parts):
        parts = tuple(parts)
        return lambda lam: scale * sum(p(lam) if callable(p) else p for p in parts)
    return scale * math.fsum(parts)


class FlatProblem:
    """Square nonlinear problem produced by :func:`assemble_problem`."""

    def __init__(self, model: Model, phase: str, unknowns: list[Variable],
                 equations: list[Equation], slot: dict[str, int], consts: list,
                 eliminated: dict[str, str]):
        self.model = model
        self.phase = phase
        self.unknowns = unknowns
        self.equations = equations
        self.slot = slot
        self.n = len(unknowns)
        self._consts = consts
        self.eliminated = eliminated
        self.regime = FULL
        self.names = [v.name for v in unknowns]
        self.kinds = [v.kind for v in unknowns]
        self.equation_names = [eq.name for eq in equations]
        self.index = {v.name: i for i, v in enumerate(unknowns)}
        self.nominal = np.array([v.nominal for v in unknowns])
        self.lower = np.array([v.min for v in unknowns])
        self.upper = np.array([v.max for v in unknowns])
        self.eq_nominal = np.array([eq.nominal for eq in equations])
        self._incidence: dict[str, list[tuple[int, ...]]] = {}
        self._start = np.array([v.start for v in unknowns], dtype=float)

    @property
    def is_square(self) -> bool:
        return self.n == len(self.equations)

    def start_vector(self) -> np.ndarray:
        return self._start.copy()

    def set_start(self, values: Mapping[str, float]) -> list[str]:
        """Overwrite start values by unknown name; returns the names used."""
        used = []
        for name, val in values.items():
            k = self.slot.get(name)
            if k is not None and k < self.n:
                self._start[k] = val
                used.append(name)
        return used

    def set_constant(self, name: str, value: float):
        k = self.slot[name]
        if k < self.n:
            raise KeyError(f"{name} is an unknown, not a constant")
        self._consts[k - self.n] = float(value)

    def _const_values(self, lam):
        return [c(lam) if callable(c) else c for c in self._consts]

    def context(self, x=None, lam: float = 1.0) -> Context:
        xs = self._start if x is None else x
        vals = [float(a) for a in xs] + self._const_values(lam)
        return Context(vals, self.slot, lam)

    def set_lambda(self, ctx: Context, lam: float):
        ctx.lam = lam
        n = self.n
        for i, c in enumerate(self._consts):
            if callable(c):
                ctx.vals[n + i] = c(lam)

    def eval_equation(self, i: int, ctx: Context) -> float:
        eq = self.equations[i]
        try:
            r = eq.fn(ctx)
        except EvaluationError as exc:
            if exc.equation is None:
                exc.equation = eq.name
            raise
        except (ValueError, ZeroDivisionError, OverflowError, TypeError) as exc:
            raise EvaluationError(f"equation {eq.name}: {exc}", equation=eq.name) from exc
        if not math.isfinite(r):
            raise EvaluationError(f"equation {eq.name} evaluated to {r}", equation=eq.name)
        return r

    def incidence(self, regime: str = FULL, x=None) -> list[tuple[int, ...]]:
        """Unknown indices read by every equation in the given lambda regime."""
        if x is None and regime in self._incidence:
            return self._incidence[regime]
        lam = _TRACE_LAMBDA[regime]
        xs = self._start if x is None else x
        vals = [float(a) for a in xs] + self._const_values(lam)
        inc = []
        for eq in self.equations:
            t = TraceContext(vals, self.slot, lam, self.n)
            fn = eq.trace_fn if isinstance(eq, DerivativeBalance) else eq.fn
            try:
                fn(t)
            except (ValueError, ZeroDivisionError, OverflowError, ArithmeticError) as exc:
                raise EvaluationError(
                    f"equation {eq.name} cannot be traced at the start values: {exc}",
                    equation=eq.name) from exc
            inc.append(tuple(sorted(t.seen)))
        if x is None:
            self._incidence[regime] = inc
        return inc

    def value_of(self, name: str, x, lam: float = 1.0) -> float:
        k = self.slot[name]
        if k < self.n:
            return float(x[k])
        c = self._consts[k - self.n]
        return c(lam) if callable(c) else c

    def full_solution(self, x, lam: float = 1.0) -> dict[str, float]:
        """Values of every model variable, including eliminated ones."""
        out = {}
        for name in self.model.variables:
            if name in self.slot:
                out[name] = self.value_of(name, x, lam)
        return out

    def subproblem_view(self):  # pragma: no cover - debugging helper
        return {eq.name: [self.names[k] for k in inc]
                for eq, inc in zip(self.equations, self.incidence())}


def residual_eval(problem: FlatProblem, x, lam: float) -> np.ndarray:
    """Residual vector of all equations at (x, lam); raises on non-finite rows."""
    if len(x) != problem.n:
        raise DomainError(f"expected {problem.n} unknowns, got {len(x)}")
    ctx = problem.context(x, lam)
    return np.array([problem.eval_equation(i, ctx) for i in range(len(problem.equations))])


def assemble_problem(model: Model, phase: str = "init", constants: Mapping[str, float] | None = None,
                     extra_variables: Sequence[Variable] = (),
                     extra_equations: Sequence[Equation] = (),
                     eliminate: bool = True, check: bool = True) -> FlatProblem:
    """Build the flat problem for one phase (``"init"`` or ``"sim"``).

    Fixed parameters and names in ``constants`` become constants.  With
    ``eliminate`` the equations ``var = const``, ``a = b`` and derivative
    balances whose derivatives are all zero are removed symbolically.
    """
    constants = dict(constants or {})
    variables = dict(model.variables)
    for v in extra_variables:
        variables[v.name] = v
    active = {Phase.BOTH, Phase.INITIAL if phase == "init" else Phase.SIMULATION}
    equations = [eq for eq in list(model.equations) + list(extra_equations) if eq.phase in active]

    parent: dict[str, str] = {}
    const: dict[str, object] = {}
    order = {name: i for i, name in enumerate(variables)}
    for name, v in variables.items():
        parent[name] = name
        if name in constants:
            const[name] = float(constants[name])
        elif v.role is Role.FIXED:
            const[name] = float(v.value)
        elif v.role is Role.UNKNOWN_PARAMETER and phase != "init":
            raise DomainError(f"unknown parameter {name} needs a value outside initialization")

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def prefer(a, b):
        va, vb = variables[a], variables[b]
        ka = (va.role is not Role.STATE, order[a])
        kb = (vb.role is not Role.STATE, order[b])
        return (a, b) if ka <= kb else (b, a)

    consumed = [False] * len(equations)
    eliminated: dict[str, str] = {}
    changed = eliminate
    while changed:
        changed = False
        for i, eq in enumerate(equations):
            if consumed[i]:
                continue
            if isinstance(eq, Fix):
                r = find(eq.var)
                if r not in const:
                    const[r] = eq.value
                    consumed[i] = changed = True
                    eliminated[eq.name] = f"fixes {r}"
            elif isinstance(eq, Linear):
                coefs: dict[str, float] = {}
                known = [eq.const]
                for var, a in eq.terms.items():
                    r = find(var)
                    if r in const:
                        c = const[r]
                        if callable(c):
                            known.append(lambda lam, c=c, a=a: a * c(lam))
                        else:
                            known.append(a * c)
                    else:
                        coefs[r] = coefs.get(r, 0.0) + a
                coefs = {k: a for k, a in coefs.items() if a != 0.0}
                if len(coefs) == 1:
                    (r, a), = coefs.items()
                    const[r] = _combine(known, -1.0 / a)
                    consumed[i] = changed = True
                    eliminated[eq.name] = f"fixes {r}"
                elif len(coefs) == 2 and all(_is_zero(k) for k in known):
                    (r1, a1), (r2, a2) = coefs.items()
                    if a1 == -a2:
                        keep, drop = prefer(r1, r2)
                        parent[drop] = keep
                        consumed[i] = changed = True
                        eliminated[eq.name] = f"aliases {drop} -> {keep}"
            elif isinstance(eq, DerivativeBalance):
                r = find(eq.target)
                if r in const:
                    continue
                if all(find(d) in const and _is_zero(const[find(d)]) for _, d in eq.terms):
                    const[r] = 0.0
                    consumed[i] = changed = True
                    eliminated[eq.name] = f"fixes {r} = 0"

    roots = []
    seen = set()
    for name in variables:
        r = find(name)
        if r not in const and r not in seen:
            seen.add(r)
            roots.append(r)
    roots.sort(key=order.__getitem__)
    unknowns = []
    slot: dict[str, int] = {}
    for k, r in enumerate(roots):
        v = variables[r]
        unknowns.append(v)
        slot[r] = k
    consts_list = []
    const_slot = {}
    n = len(unknowns)
    for name in variables:
        r = find(name)
        if r in const:
            if r not in const_slot:
                const_slot[r] = n + len(consts_list)
                consts_list.append(const[r])
            slot[name] = const_slot[r]
        else:
            slot[name] = slot[r]
    kept = [eq for i, eq in enumerate(equations) if not consumed[i]]
    problem = FlatProblem(model, phase, unknowns, kept, slot, consts_list, eliminated)
    if check:
        check_square(problem)
    return problem


def check_square(problem: FlatProblem):
    """Raise :class:`StructuralSingularityError` unless a perfect matching exists."""
    from .structure import match_variables

    match_variables(problem, FULL)


def assemble_initialization_problem(model: Model, scenario=None, **kw) -> FlatProblem:
    """Initialization problem: simulation equations plus initial equations."""
    if scenario is not None and model.scenario is not None and str(scenario) != str(model.scenario):
        raise DomainError(f"model was flattened for scenario {model.scenario}, not {scenario}")
    return assemble_problem(model, "init", **kw)


def euler_problem(model: Model, constants: Mapping[str, float], dt: float, **kw) -> FlatProblem:
    """Simulation equations closed by one implicit-Euler step per state."""
    ders = model.derivative_of()
    extra_vars = []
    extra_eqs = []
    for s in model.states():
        if s.name not in ders:
            raise DomainError(f"state {s.name} has no derivative variable")
        prev = f"{s.name}.prev"
        extra_vars.append(Variable(prev, nominal=s.nominal, start=s.start, role=Role.FIXED,
                                   value=s.start, unit=s.unit))
        d = ders[s.name]
        extra_eqs.append(Linear(f"euler({s.name})", {d: dt, s.name: -1.0, prev: 1.0},
                                phase=Phase.SIMULATION, nominal=s.nominal))
    consts = dict(constants)
    for v in extra_vars:
        consts.setdefault(v.name, v.value)
    return assemble_problem(model, "sim", constants=consts, extra_variables=extra_vars,
                            extra_equations=extra_eqs, **kw)
