"""System-boundary input/output blocks for the six initialization scenarios.

An input block drives a plant actuator signal ``u_out``; an output block
reads a plant sensor ``y_in``.  Each block owns the calculated on- and
off-design values as unknown parameters.  In forward mode the inputs are
fixed and the outputs computed; in backward mode a paired output is fixed
and its input computed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

from .eqsys import Equation, Fix, FlatProblem, Linear, Phase, Role, Variable, homotopy_combine
from .errors import BalanceError, ConfigError, MappingError


class Scenario(str, enum.Enum):
    STEADY_ON = "SteadyStateOnDesign"
    STEADY_OFF = "SteadyStateOffDesign"
    SMALLSIG_ON = "SmallSignalOnDesign"
    SMALLSIG_OFF = "SmallSignalOffDesign"
    SIM_ON = "SimulationOnDesign"
    SIM_OFF = "SimulationOffDesign"

    @property
    def family(self) -> str:
        return {"Ste": "steady", "Sma": "smallsig", "Sim": "sim"}[self.value[:3]]

    @property
    def off_design(self) -> bool:
        return self.value.endswith("OffDesign")

    @classmethod
    def parse(cls, text) -> "Scenario":
        if isinstance(text, Scenario):
            return text
        for s in cls:
            if text in (s.value, s.name, s.cli_name):
                return s
        raise ConfigError(f"unknown scenario {text!r}")

    @property
    def cli_name(self) -> str:
        return f"{self.family}-{'off' if self.off_design else 'on'}"

    def __str__(self):
        return self.value


class Mode(str, enum.Enum):
    FWD = "fwd"
    BWD = "bwd"

    @classmethod
    def parse(cls, text) -> "Mode":
        try:
            return cls(str(getattr(text, "value", text)).lower())
        except ValueError:
            raise ConfigError(f"unknown initialization mode {text!r}") from None


@dataclass
class InputBlock:
    name: str
    target: str                   # plant signal driven by u_out
    u_des: float
    mode: Mode = Mode.FWD
    u_norm: float = 1.0
    partner: str | None = None    # output block paired in backward mode
    u_in: float = 0.0             # external input value (small-signal and simulation)

    def __post_init__(self):
        self.mode = Mode.parse(self.mode)
        if not self.u_norm > 0:
            raise ConfigError(f"input block {self.name}: u_norm must be positive")

    @property
    def names(self):
        n = self.name
        return {"u_out": f"{n}.u_out", "u_in": f"{n}.u_in", "u_des_calc": f"{n}.u_des_calc",
                "u_offdes_calc": f"{n}.u_offdes_calc"}

    def to_dict(self):
        return {"name": self.name, "target": self.target, "u_des": self.u_des,
                "mode": self.mode.value, "u_norm": self.u_norm, "partner": self.partner,
                "u_in": self.u_in}


@dataclass
class OutputBlock:
    name: str
    sensor: str                   # plant variable read into y_in
    y_des: float
    y_offdes: float | None = None
    mode: Mode = Mode.FWD
    y_norm: float = 1.0

    def __post_init__(self):
        self.mode = Mode.parse(self.mode)
        if self.y_offdes is None:
            self.y_offdes = self.y_des
        if not self.y_norm > 0:
            raise ConfigError(f"output block {self.name}: y_norm must be positive")

    @property
    def names(self):
        n = self.name
        return {"y_in": f"{n}.y_in", "y_out": f"{n}.y_out", "y_des_calc": f"{n}.y_des_calc",
                "y_offdes_calc": f"{n}.y_offdes_calc"}

    def to_dict(self):
        return {"name": self.name, "sensor": self.sensor, "y_des": self.y_des,
                "y_offdes": self.y_offdes, "mode": self.mode.value, "y_norm": self.y_norm}


def _nominal(*vals) -> float:
    return max(max(abs(v) for v in vals), 1e-6)


def block_variables(block, scenario: Scenario, normalize: bool = False) -> list[Variable]:
    scenario = Scenario.parse(scenario)
    out = []
    if isinstance(block, InputBlock):
        nm = block.names
        nom = _nominal(block.u_des)
        out.append(Variable(nm["u_out"], nominal=nom, start=block.u_des, kind="signal"))
        for k in ("u_des_calc", "u_offdes_calc"):
            out.append(Variable(nm[k], nominal=nom, start=block.u_des, role=Role.UNKNOWN_PARAMETER,
                                kind="signal"))
        if scenario.family != "steady":
            out.append(Variable(nm["u_in"], nominal=block.u_norm, start=block.u_in, role=Role.FIXED,
                                value=block.u_in, kind="signal"))
    else:
        nm = block.names
        nom = _nominal(block.y_des, block.y_offdes)
        out.append(Variable(nm["y_in"], nominal=nom, start=block.y_des, kind="signal"))
        y_out_start = block.y_des if _plain_output(scenario, normalize) else 0.0
        y_out_nom = nom if _plain_output(scenario, normalize) else 1.0
        out.append(Variable(nm["y_out"], nominal=y_out_nom, start=y_out_start, kind="signal"))
        out.append(Variable(nm["y_des_calc"], nominal=nom, start=block.y_des, role=Role.UNKNOWN_PARAMETER,
                            kind="signal"))
        out.append(Variable(nm["y_offdes_calc"], nominal=nom, start=block.y_offdes,
                            role=Role.UNKNOWN_PARAMETER, kind="signal"))
    return out


def _plain_output(scenario: Scenario, normalize: bool) -> bool:
    return scenario.family == "steady" or (scenario.family == "sim" and not normalize)


def _uses_offdes(block, scenario: Scenario) -> bool:
    return scenario.off_design and block.mode is Mode.BWD


def emit_equations(block, scenario, normalize: bool = False) -> tuple[list[Equation], list[Equation]]:
    """Return ``(equations, initial_equations)`` of one block.

    ``equations`` may contain a phase-switched pair (initial-only and
    simulation-only) for the Simulation scenarios.  Forward blocks in
    off-design scenarios keep their forward rows.
    """
    scenario = Scenario.parse(scenario)
    eqs: list[Equation] = []
    init: list[Equation] = []
    INIT = Phase.INITIAL
    if isinstance(block, InputBlock):
        nm = block.names
        calc = nm["u_offdes_calc"] if _uses_offdes(block, scenario) else nm["u_des_calc"]
        nom = _nominal(block.u_des)
        if scenario.family == "steady":
            eqs.append(Linear(f"{block.name}.output", {nm["u_out"]: 1.0, calc: -1.0}, nominal=nom))
        elif scenario.family == "smallsig":
            un = block.u_norm
            eqs.append(Linear(f"{block.name}.deviation",
                              {nm["u_in"]: 1.0, nm["u_out"]: -1.0 / un, calc: 1.0 / un},
                              nominal=nom / un))
        else:
            eqs.append(Linear(f"{block.name}.output.initial", {nm["u_out"]: 1.0, calc: -1.0},
                              phase=INIT, nominal=nom))
            if normalize:
                terms = {nm["u_out"]: 1.0, calc: -1.0, nm["u_in"]: -block.u_norm}
            else:
                terms = {nm["u_out"]: 1.0, nm["u_in"]: -1.0}
            eqs.append(Linear(f"{block.name}.output.simulation", terms, phase=Phase.SIMULATION,
                              nominal=nom))
        if block.mode is Mode.FWD:
            init.append(Fix(f"{block.name}.des_calc", nm["u_des_calc"], block.u_des, phase=INIT, nominal=nom))
            init.append(Fix(f"{block.name}.offdes_calc", nm["u_offdes_calc"], block.u_des, phase=INIT,
                            nominal=nom))
        elif scenario.off_design:
            init.append(Fix(f"{block.name}.des_calc", nm["u_des_calc"], block.u_des, phase=INIT, nominal=nom))
        else:
            init.append(Fix(f"{block.name}.offdes_calc", nm["u_offdes_calc"], block.u_des, phase=INIT,
                            nominal=nom))
        return eqs, init

    nm = block.names
    nom = _nominal(block.y_des, block.y_offdes)
    calc = nm["y_offdes_calc"] if _uses_offdes(block, scenario) else nm["y_des_calc"]
    # kept opaque (not Linear) so that the symbolic eliminations, and hence the
    # structure of the initialization problem, are the same in every scenario
    if _plain_output(scenario, normalize):
        eqs.append(Equation(f"{block.name}.output", lambda v: v[nm["y_out"]] - v[nm["y_in"]],
                            nominal=nom))
    else:
        yn = block.y_norm
        eqs.append(Equation(f"{block.name}.deviation",
                            lambda v: v[nm["y_out"]] - (v[nm["y_in"]] - v[calc]) / yn))
    y_des, y_off = block.y_des, block.y_offdes
    if block.mode is Mode.BWD:
        if scenario.off_design:
            init.append(Fix(f"{block.name}.target", nm["y_in"],
                            lambda lam: homotopy_combine(y_off, y_des, lam), phase=INIT, nominal=nom))
        else:
            init.append(Fix(f"{block.name}.target", nm["y_in"], y_des, phase=INIT, nominal=nom))
    init.append(Fix(f"{block.name}.des_calc", nm["y_des_calc"], y_des, phase=INIT, nominal=nom))
    off_value = y_off if (block.mode is Mode.BWD and scenario.off_design) else y_des
    init.append(Fix(f"{block.name}.offdes_calc", nm["y_offdes_calc"], off_value, phase=INIT,
                    nominal=nom))
    return eqs, init


def validate_balance(inputs: Sequence[InputBlock], outputs: Sequence[OutputBlock], scenario) -> int:
    """Check backward-mode pairing; return the number of initial equations.

    The count does not depend on the scenario when the pairing is valid.
    """
    scenario = Scenario.parse(scenario)
    out_by_name = {o.name: o for o in outputs}
    problems = []
    claimed: dict[str, str] = {}
    for b in inputs:
        if b.mode is Mode.BWD:
            if b.partner is None:
                problems.append(f"backward input {b.name} has no paired output")
                continue
            o = out_by_name.get(b.partner)
            if o is None:
                problems.append(f"backward input {b.name} pairs with unknown output {b.partner}")
            elif o.mode is not Mode.BWD:
                problems.append(f"backward input {b.name} pairs with forward output {o.name}")
            elif b.partner in claimed:
                problems.append(f"output {b.partner} paired with both {claimed[b.partner]} and {b.name}")
            else:
                claimed[b.partner] = b.name
    for o in outputs:
        if o.mode is Mode.BWD and o.name not in claimed:
            problems.append(f"backward output {o.name} has no paired backward input")
    if problems:
        raise BalanceError("; ".join(problems))
    return sum(len(emit_equations(b, scenario)[1]) for b in (*inputs, *outputs))


def simulation_inputs(inputs: Sequence[InputBlock], solution: Mapping[str, float],
                      scenario, normalize: bool = False) -> dict[str, float]:
    """External input values that keep a Simulation-scenario plant at its initial point."""
    scenario = Scenario.parse(scenario)
    out = {}
    for b in inputs:
        nm = b.names
        if scenario.family == "sim" and not normalize:
            out[nm["u_in"]] = solution[nm["u_out"]]
        elif scenario.family != "steady":
            out[nm["u_in"]] = b.u_in
    return out


def warm_start_backward(forward: Mapping[str, float], problem: FlatProblem,
                        strict: bool = False) -> list[str]:
    """Copy converged forward values into the start vector of ``problem``.

    Returns the unknowns of ``problem`` that had no forward value.  Raises
    :class:`MappingError` when nothing overlaps, or with ``strict`` when any
    unknown is left without a value.
    """
    names = [v.name for v in problem.unknowns]
    overlap = {n: float(forward[n]) for n in names if n in forward}
    orphans = [n for n in names if n not in forward]
    if not overlap:
        raise MappingError("forward solution shares no unknowns with the backward problem", orphans)
    if strict and orphans:
        raise MappingError(f"{len(orphans)} unknowns have no forward value", orphans)
    problem.set_start(overlap)
    return orphans
