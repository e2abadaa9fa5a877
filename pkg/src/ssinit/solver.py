"""Scaled damped Newton, sequential block solution and homotopy continuation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .eqsys import FULL, SIMPLIFIED, FlatProblem, Model, euler_problem
from .errors import (ConvergenceError, DomainError, EvaluationError, HomotopyStalledError,
                     VerificationError)
from .structure import BltOrdering, StrongComponent, blt_decompose

log = logging.getLogger(__name__)

FD_STEP = 1e-7


@dataclass
class SolverConfig:
    residual_tol: float = 1e-8
    step_tol: float = 1e-10
    max_iterations: int = 50
    contraction: float = 0.5
    max_halvings: int = 10
    use_tearing: bool = True
    # extra chord steps reusing the last Jacobian after a full Newton step
    polish_steps: int = 2

    def __post_init__(self):
        if not (self.residual_tol > 0 and self.step_tol > 0 and self.max_iterations > 0
                and self.max_halvings >= 0):
            raise DomainError("solver tolerances and limits must be positive")
        if not 0.0 < self.contraction < 1.0:
            raise DomainError("line-search contraction must lie in (0, 1)")


@dataclass
class HomotopySchedule:
    initial_step: float = 0.1
    growth: float = 2.0
    shrink: float = 0.5
    min_step: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.min_step <= self.initial_step <= 1.0:
            raise DomainError("need 0 < min_step <= initial_step <= 1")
        if not self.growth > 1.0:
            raise DomainError("growth factor must exceed 1")
        if not 0.0 < self.shrink < 1.0:
            raise DomainError("shrink factor must lie in (0, 1)")


@dataclass
class Scaling:
    """Unknowns are divided by ``x_scale``, residual rows by ``row_scale``."""

    x_scale: np.ndarray
    row_scale: np.ndarray
    diagnostics: list = field(default_factory=list)

    def to_scaled(self, x):
        return np.asarray(x, dtype=float) / self.x_scale

    def from_scaled(self, z):
        return np.asarray(z, dtype=float) * self.x_scale


@dataclass
class ScaledProblem:
    problem: FlatProblem
    scaling: Scaling

    def residual(self, z, lam: float = 1.0) -> np.ndarray:
        from .eqsys import residual_eval

        return residual_eval(self.problem, self.scaling.from_scaled(z), lam) / self.scaling.row_scale


@dataclass
class SolveStats:
    iterations: int = 0
    max_component_iterations: int = 0
    damping_events: int = 0
    failures: int = 0
    torn_components: int = 0
    fallbacks: int = 0
    components: int = 0

    def add(self, info: "NewtonInfo"):
        self.iterations += info.iterations
        self.max_component_iterations = max(self.max_component_iterations, info.iterations)
        self.damping_events += info.damping_events
        self.torn_components += int(info.torn)
        self.fallbacks += int(info.fallback)
        self.components += 1

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class NewtonInfo:
    iterations: int = 0
    damping_events: int = 0
    residual_norm: float = math.inf
    history: list = field(default_factory=list)
    torn: bool = False
    fallback: bool = False


@dataclass
class HomotopyTrace:
    lambdas: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    stats: list = field(default_factory=list)
    orderings: dict = field(default_factory=dict)
    scalings: dict = field(default_factory=dict)

    @property
    def solution(self):
        return self.snapshots[-1]

    @property
    def newton_failures(self) -> int:
        return len(self.rejected)

    def append(self, lam, x, stats: SolveStats):
        self.lambdas.append(float(lam))
        self.iterations.append(stats.iterations)
        self.snapshots.append(np.array(x, dtype=float))
        self.stats.append(stats)


# --------------------------------------------------------------------------
# residual blocks


class _Block:
    """Scaled residual view of a subset of equations and unknowns."""

    def __init__(self, problem: FlatProblem, eqs: Sequence[int], variables: Sequence[int],
                 regime: str, scaling: Scaling):
        self.problem = problem
        self.eqs = list(eqs)
        self.vars = list(variables)
        self.rs = scaling.row_scale[self.eqs]
        self.ns = scaling.x_scale[self.vars]
        self.lower = problem.lower[self.vars]
        self.upper = problem.upper[self.vars]
        inc = problem.incidence(regime)
        pos = {v: k for k, v in enumerate(self.vars)}
        self.col_rows: list[list[int]] = [[] for _ in self.vars]
        for p, e in enumerate(self.eqs):
            for v in inc[e]:
                k = pos.get(v)
                if k is not None:
                    self.col_rows[k].append(p)

    def raw(self, ctx) -> np.ndarray:
        ev = self.problem.eval_equation
        return np.array([ev(e, ctx) for e in self.eqs])

    def values(self, ctx) -> np.ndarray:
        vals = ctx.vals
        return np.array([vals[j] for j in self.vars])

    def assign(self, ctx, x):
        vals = ctx.vals
        for j, a in zip(self.vars, x):
            vals[j] = float(a)

    def jacobian(self, ctx, r_raw: np.ndarray) -> np.ndarray:
        """Forward-difference Jacobian in scaled coordinates."""
        vals = ctx.vals
        ev = self.problem.eval_equation
        m = len(self.eqs)
        J = np.zeros((m, len(self.vars)))
        for k, j in enumerate(self.vars):
            rows = self.col_rows[k]
            if not rows:
                continue
            xj = vals[j]
            h = FD_STEP * max(abs(xj), self.ns[k])
            if xj + h > self.upper[k]:
                h = -h
            vals[j] = xj + h
            h = vals[j] - xj
            try:
                for p in rows:
                    try:
                        d = (ev(self.eqs[p], ctx) - r_raw[p]) / h
                    except EvaluationError:
                        vals[j] = xj - h
                        d = (r_raw[p] - ev(self.eqs[p], ctx)) / h
                        vals[j] = xj + h
                    if not math.isfinite(d):
                        raise EvaluationError(
                            f"non-finite Jacobian entry d({self.problem.equation_names[self.eqs[p]]})"
                            f"/d({self.problem.names[j]})",
                            equation=self.problem.equation_names[self.eqs[p]],
                            variable=self.problem.names[j])
                    J[p, k] = d
            except EvaluationError as exc:
                if exc.variable is None:
                    exc.variable = self.problem.names[j]
                raise
            finally:
                vals[j] = xj
        return J * self.ns[None, :] / self.rs[:, None]


def _solve_linear(J, r):
    try:
        dz = np.linalg.solve(J, -r)
    except np.linalg.LinAlgError:
        dz = None
    if dz is None or not np.all(np.isfinite(dz)):
        raise ConvergenceError("singular Jacobian")
    return dz


def _newton_core(block: _Block, ctx, config: SolverConfig, tol: float | None = None,
                 max_iterations: int | None = None) -> NewtonInfo:
    """Damped Newton on ``block`` updating ``ctx`` in place."""
    tol = config.residual_tol if tol is None else tol
    max_it = config.max_iterations if max_iterations is None else max_iterations
    info = NewtonInfo()
    x = block.values(ctx)
    r_raw = block.raw(ctx)
    r = r_raw / block.rs
    norm = float(np.max(np.abs(r))) if len(r) else 0.0
    info.history.append(norm)
    best = (norm, x.copy())
    J = None
    nudges = 0
    while True:
        if norm <= tol:
            break
        if info.iterations >= max_it:
            block.assign(ctx, best[1])
            raise ConvergenceError(
                f"Newton did not converge in {max_it} iterations (residual {norm:.3e})",
                best=best[1], history=info.history)
        J = block.jacobian(ctx, r_raw)
        try:
            dz = _solve_linear(J, r)
        except ConvergenceError:
            # singular point: shift the iterate by an index-graded amount and retry
            nudges += 1
            if nudges > 3:
                block.assign(ctx, best[1])
                raise ConvergenceError(f"singular Jacobian (residual {norm:.3e})",
                                       best=best[1], history=info.history)
            x = np.clip(x + 0.05 * block.ns * np.arange(1, len(x) + 1) / len(x),
                        block.lower, block.upper)
            block.assign(ctx, x)
            r_raw = block.raw(ctx)
            r = r_raw / block.rs
            norm = float(np.max(np.abs(r)))
            info.damping_events += 1
            continue
        info.iterations += 1
        dx = dz * block.ns
        x_full = np.clip(x + dx, block.lower, block.upper)
        if np.any(x_full != x + dx):
            info.damping_events += 1
        dx = x_full - x
        merit = float(np.dot(r, r))
        t = 1.0
        accepted = False
        for _ in range(config.max_halvings + 1):
            x_try = x + t * dx
            block.assign(ctx, x_try)
            try:
                r_try_raw = block.raw(ctx)
            except EvaluationError:
                r_try_raw = None
            if r_try_raw is not None:
                r_try = r_try_raw / block.rs
                if float(np.dot(r_try, r_try)) <= (1.0 - 1e-4 * t) * merit or merit == 0.0:
                    accepted = True
                    break
            t *= config.contraction
            info.damping_events += 1
        if not accepted:
            block.assign(ctx, best[1])
            raise ConvergenceError(f"line search failed (residual {norm:.3e})",
                                   best=best[1], history=info.history)
        step_norm = float(np.max(np.abs(t * dx / block.ns))) if len(dx) else 0.0
        x, r_raw, r = x_try, r_try_raw, r_try
        norm = float(np.max(np.abs(r)))
        if t == 1.0 and config.polish_steps:
            x, r_raw, r, norm = _polish(block, ctx, J, x, r_raw, r, norm, config.polish_steps)
        info.history.append(norm)
        if norm < best[0]:
            best = (norm, x.copy())
        if step_norm <= config.step_tol:
            break
    if J is not None and config.polish_steps and norm > 0.0:
        x, r_raw, r, norm = _polish(block, ctx, J, x, r_raw, r, norm, config.polish_steps)
    if norm > tol:
        block.assign(ctx, best[1])
        raise ConvergenceError(f"Newton stagnated (residual {norm:.3e}, step below {config.step_tol:g})",
                               best=best[1], history=info.history)
    info.residual_norm = norm
    return info


def _polish(block, ctx, J, x, r_raw, r, norm, steps):
    """Chord refinements with a frozen Jacobian, kept only while they help."""
    for _ in range(steps):
        if norm == 0.0:
            break
        try:
            dz = _solve_linear(J, r)
        except ConvergenceError:
            break
        x_try = np.clip(x + dz * block.ns, block.lower, block.upper)
        block.assign(ctx, x_try)
        try:
            r_try_raw = block.raw(ctx)
        except EvaluationError:
            block.assign(ctx, x)
            break
        r_try = r_try_raw / block.rs
        n_try = float(np.max(np.abs(r_try)))
        if not n_try < norm:
            block.assign(ctx, x)
            break
        x, r_raw, r, norm = x_try, r_try_raw, r_try, n_try
    return x, r_raw, r, norm


class _TornBlock:
    """Residuals of the torn equations as a function of the tearing variables."""

    def __init__(self, problem, comp: StrongComponent, regime, scaling, config):
        self.problem = problem
        self.outer = _Block(problem, comp.torn_equations, comp.tearing_variables, regime, scaling)
        self.inner = [_Block(problem, [e], [v], regime, scaling) for e, v in comp.assignments]
        self.config = config
        self.inner_config = SolverConfig(residual_tol=config.residual_tol * 1e-4,
                                         step_tol=1e-14, max_iterations=30,
                                         contraction=config.contraction,
                                         max_halvings=config.max_halvings,
                                         polish_steps=config.polish_steps)

    def run_assignments(self, ctx):
        for b in self.inner:
            _newton_core(b, ctx, self.inner_config)

    def torn_residual(self, ctx, t):
        self.outer.assign(ctx, t)
        self.run_assignments(ctx)
        return self.outer.raw(ctx)

    def solve(self, ctx) -> NewtonInfo:
        cfg = self.config
        ob = self.outer
        info = NewtonInfo(torn=True)
        t = ob.values(ctx)
        r_raw = self.torn_residual(ctx, t)
        r = r_raw / ob.rs
        norm = float(np.max(np.abs(r)))
        info.history.append(norm)
        while norm > cfg.residual_tol:
            if info.iterations >= cfg.max_iterations:
                raise ConvergenceError("torn Newton did not converge", history=info.history)
            J = np.zeros((len(r), len(t)))
            saved = list(ctx.vals)
            for k in range(len(t)):
                h = FD_STEP * max(abs(t[k]), ob.ns[k])
                tp = t.copy()
                tp[k] += h
                J[:, k] = (self.torn_residual(ctx, tp) - r_raw) / h * ob.ns[k] / ob.rs
                ctx.vals[:] = saved
            if not np.all(np.isfinite(J)):
                raise ConvergenceError("non-finite torn Jacobian")
            dz = _solve_linear(J, r)
            info.iterations += 1
            dt = np.clip(t + dz * ob.ns, ob.lower, ob.upper) - t
            merit = float(np.dot(r, r))
            step = 1.0
            accepted = False
            for _ in range(cfg.max_halvings + 1):
                try:
                    r_try_raw = self.torn_residual(ctx, t + step * dt)
                    r_try = r_try_raw / ob.rs
                    if float(np.dot(r_try, r_try)) <= (1.0 - 1e-4 * step) * merit:
                        accepted = True
                        break
                except (EvaluationError, ConvergenceError):
                    pass
                ctx.vals[:] = saved
                step *= cfg.contraction
                info.damping_events += 1
            if not accepted:
                raise ConvergenceError("torn line search failed", history=info.history)
            t = t + step * dt
            r_raw, r = r_try_raw, r_try
            norm = float(np.max(np.abs(r)))
            info.history.append(norm)
            if float(np.max(np.abs(step * dt / ob.ns))) <= cfg.step_tol:
                break
        info.residual_norm = norm
        return info


def _solve_component(comp: StrongComponent, problem, ctx, regime, scaling, config) -> NewtonInfo:
    if config.use_tearing and comp.assignments and len(comp.tearing_variables) < comp.size:
        saved = list(ctx.vals)
        try:
            info = _TornBlock(problem, comp, regime, scaling, config).solve(ctx)
            # final simultaneous pass so every member equation meets the tolerance
            block = _Block(problem, comp.equations, comp.variables, regime, scaling)
            extra = _newton_core(block, ctx, config)
            info.iterations += extra.iterations
            info.residual_norm = extra.residual_norm
            return info
        except (ConvergenceError, EvaluationError) as exc:
            log.debug("torn solve failed (%s); falling back to full Newton", exc)
            ctx.vals[:] = saved
            info = _newton_core(_Block(problem, comp.equations, comp.variables, regime, scaling),
                                ctx, config)
            info.fallback = True
            return info
    return _newton_core(_Block(problem, comp.equations, comp.variables, regime, scaling), ctx, config)


# --------------------------------------------------------------------------
# public operations


def _regime_for(lam: float) -> str:
    return SIMPLIFIED if lam == 0.0 else FULL


def scale(problem: FlatProblem, x0, lam: float = 0.0, regime: str | None = None,
          fallback: Scaling | None = None) -> Scaling:
    """Row and column scaling from the Jacobian at ``x0``.

    Row ``i`` is divided by ``max(nominal_residual_i, max_j |dr_i/dz_j|)``
    where ``z = x / nominal``.  Rows whose Jacobian cannot be evaluated reuse
    ``fallback`` when given.
    """
    regime = regime or _regime_for(lam)
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise DomainError("scaling point must be finite")
    x_scale = problem.nominal.copy()
    unit = Scaling(x_scale, np.ones(len(problem.equations)))
    ctx = problem.context(x0, lam)
    rows = np.array(problem.eq_nominal, dtype=float)
    diagnostics = []
    inc = problem.incidence(regime)
    for i in range(len(problem.equations)):
        try:
            block = _Block(problem, [i], list(inc[i]), regime, unit)
            r = block.raw(ctx)
            J = block.jacobian(ctx, r)
            norm = float(np.max(np.abs(J))) if J.size else 0.0
        except EvaluationError as exc:
            if fallback is None:
                raise
            rows[i] = fallback.row_scale[i]
            diagnostics.append(f"{problem.equation_names[i]}: {exc}; reusing previous scale")
            continue
        if norm == 0.0:
            msg = f"{problem.equation_names[i]}: zero Jacobian row; using nominal residual"
            diagnostics.append(msg)
            log.info(msg)
        rows[i] = max(rows[i], norm)
    return Scaling(x_scale, rows, diagnostics)


def scaled_residual_norm(problem, x, lam, scaling: Scaling) -> float:
    from .eqsys import residual_eval

    r = residual_eval(problem, x, lam) / scaling.row_scale
    return float(np.max(np.abs(r))) if len(r) else 0.0


def whole_component(problem) -> StrongComponent:
    return StrongComponent(tuple(range(len(problem.equations))), tuple(range(problem.n)))


def newton_solve(component: StrongComponent, problem: FlatProblem, guess, config: SolverConfig | None = None,
                 lam: float = 1.0, scaling: Scaling | None = None, return_info: bool = False):
    """Solve one strong component; returns the full vector with its unknowns updated."""
    config = config or SolverConfig()
    guess = np.asarray(guess, dtype=float)
    if len(component.equations) != len(component.variables):
        raise DomainError("component must be square")
    if not np.all(np.isfinite(guess)):
        raise DomainError("guess must be finite")
    regime = _regime_for(lam)
    if scaling is None:
        scaling = scale(problem, guess, lam, regime)
    ctx = problem.context(guess, lam)
    info = _solve_component(component, problem, ctx, regime, scaling, config)
    x = np.array(ctx.vals[:problem.n])
    return (x, info) if return_info else x


def solve_sequence(ordering: BltOrdering, problem: FlatProblem, starts, lam: float,
                   config: SolverConfig | None = None, scaling: Scaling | None = None,
                   return_stats: bool = False):
    """Solve the components in order, each using the values solved before it."""
    config = config or SolverConfig()
    regime = ordering.regime
    x0 = np.asarray(starts, dtype=float)
    if scaling is None:
        scaling = scale(problem, x0, lam, regime)
    ctx = problem.context(x0, lam)
    stats = SolveStats()
    for k, comp in enumerate(ordering.components):
        try:
            info = _solve_component(comp, problem, ctx, regime, scaling, config)
        except (ConvergenceError, EvaluationError) as exc:
            names = [problem.equation_names[e] for e in comp.equations]
            best = np.array(ctx.vals[:problem.n])
            history = getattr(exc, "history", [])
            raise ConvergenceError(
                f"component {k} (size {comp.size}, equations {', '.join(names[:5])}"
                f"{'...' if len(names) > 5 else ''}) failed at lambda={lam}: {exc}",
                best=best, history=history, component=k, equations=names) from exc
        stats.add(info)
    x = np.array(ctx.vals[:problem.n])
    return (x, stats) if return_stats else x


def continuation(problem: FlatProblem, schedule: HomotopySchedule | None = None,
                 config: SolverConfig | None = None, start=None) -> HomotopyTrace:
    """Solve at lambda=0 with the simplified structure, then step to lambda=1."""
    schedule = schedule or HomotopySchedule()
    config = config or SolverConfig()
    trace = HomotopyTrace()
    x = problem.start_vector() if start is None else np.asarray(start, dtype=float)
    ord0 = blt_decompose(problem, SIMPLIFIED, tearing=config.use_tearing)
    ord1 = blt_decompose(problem, FULL, tearing=config.use_tearing)
    trace.orderings = {SIMPLIFIED: ord0, FULL: ord1}
    sc0 = scale(problem, x, 0.0, SIMPLIFIED)
    # a start that already solves the actual problem (e.g. a warm start) is accepted as is
    try:
        sc1 = scale(problem, x, 1.0, FULL, fallback=sc0)
        accepted = scaled_residual_norm(problem, x, 1.0, sc1) <= config.residual_tol
    except EvaluationError:
        accepted = False
    if accepted:
        trace.append(1.0, x, SolveStats())
        trace.scalings = {SIMPLIFIED: sc0, FULL: sc1}
        return trace
    x, stats = solve_sequence(ord0, problem, x, 0.0, config, sc0, return_stats=True)
    trace.append(0.0, x, stats)
    sc1 = scale(problem, x, 1.0, FULL, fallback=sc0)
    trace.scalings = {SIMPLIFIED: sc0, FULL: sc1}
    lam = 0.0
    step = schedule.initial_step
    grow_limit = config.max_iterations / 3.0
    while lam < 1.0:
        try:
            done = scaled_residual_norm(problem, x, 1.0, sc1) <= config.residual_tol
        except EvaluationError:
            done = False
        if done:
            trace.append(1.0, x, SolveStats())
            break
        target = min(1.0, lam + step)
        try:
            x_new, stats = solve_sequence(ord1, problem, x, target, config, sc1, return_stats=True)
        except (ConvergenceError, EvaluationError) as exc:
            trace.rejected.append((target, str(exc)))
            step *= schedule.shrink
            if step < schedule.min_step:
                raise HomotopyStalledError(
                    f"homotopy stalled at lambda={lam:.6g} (step {step:.3g} below minimum "
                    f"{schedule.min_step:g}); possible singularity along the path",
                    trace=trace, lam=lam) from exc
            continue
        lam = target
        x = x_new
        trace.append(lam, x, stats)
        if stats.max_component_iterations <= grow_limit:
            step = min(step * schedule.growth, 1.0)
    return trace


def verify_steady_state(model: Model, solution: Mapping[str, float], horizon: float = 10.0,
                        dt: float = 1.0, config: SolverConfig | None = None,
                        constants: Mapping[str, float] | None = None,
                        perturb: Mapping[str, float] | None = None) -> float:
    """Integrate the simulation equations with implicit Euler from ``solution``.

    Returns ``max |x(t) - x(0)| / max(|x(0)|, nominal)`` over states and
    steps.  Unknown parameters and ``constants`` are frozen at their given
    values; ``perturb`` overrides initial state values (negative controls).
    """
    from .eqsys import Role

    config = config or SolverConfig(use_tearing=False)
    if not (horizon > 0 and dt > 0):
        raise DomainError("horizon and dt must be positive")
    consts = {name: solution[name] for name, v in model.variables.items()
              if v.role is Role.UNKNOWN_PARAMETER}
    consts.update(constants or {})
    states = model.states()
    x0 = {s.name: float(solution[s.name]) for s in states}
    x0.update({k: float(v) for k, v in (perturb or {}).items()})
    for s in states:
        consts[f"{s.name}.prev"] = x0[s.name]
    try:
        problem = euler_problem(model, consts, dt)
    except Exception as exc:
        raise VerificationError(f"cannot assemble the simulation problem: {exc}") from exc
    problem.set_start({k: v for k, v in solution.items()})
    problem.set_start(x0)
    x = problem.start_vector()
    ordering = blt_decompose(problem, FULL)
    scaling = scale(problem, x, 1.0, FULL)
    drift = 0.0
    t = 0.0
    n_steps = int(round(horizon / dt))
    for _ in range(n_steps):
        try:
            x = solve_sequence(ordering, problem, x, 1.0, config, scaling)
        except (ConvergenceError, EvaluationError) as exc:
            raise VerificationError(f"implicit Euler step failed at t={t:g}: {exc}") from exc
        t += dt
        for s in states:
            val = problem.value_of(s.name, x)
            ref = x0[s.name]
            drift = max(drift, abs(val - ref) / max(abs(ref), s.nominal))
            problem.set_constant(f"{s.name}.prev", val)
    return drift
