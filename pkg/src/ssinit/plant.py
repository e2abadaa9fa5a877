"""Plant graphs: components, directed connections, boundary blocks, flattening."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from . import boundary as bnd
from .boundary import InputBlock, Mode, OutputBlock, Scenario
from .components import (Combustor, Component, Compressor, Condenser, CondenserParams, Decoupler,
                         DecouplerParams, FuelCell, FuelCellParams, HeatExchanger, HxModule,
                         HxSide, Intercooler, PortDesign, PressureLoss, PressureLossParams, Sink,
                         Source, Turbine, TurbineParams)
from .eqsys import Fix, Linear, Model, Role, assemble_problem
from .errors import ConfigError, DomainError, InitError
from .media import DEFAULT_SPECIES, SpeciesTable

SCHEMA = "ssinit-plant/1"


@dataclass
class PlantGraph:
    components: dict = field(default_factory=dict)
    connections: list = field(default_factory=list)   # (outlet path, inlet path)
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    scenario: Scenario = Scenario.STEADY_ON
    normalize: bool = False
    species: SpeciesTable = DEFAULT_SPECIES
    solver: dict = field(default_factory=dict)
    name: str = "plant"

    def add(self, component: Component) -> Component:
        if component.name in self.components:
            raise ConfigError(f"duplicate component {component.name}")
        self.components[component.name] = component
        return component

    def connect(self, src: str, dst: str):
        self.connections.append((src, dst))

    def input(self, name) -> InputBlock:
        return next(b for b in self.inputs if b.name == name)

    def output(self, name) -> OutputBlock:
        return next(b for b in self.outputs if b.name == name)

    def port(self, path: str):
        comp, _, port = path.rpartition(".")
        if comp not in self.components:
            raise ConfigError(f"unknown component in port path {path!r}")
        c = self.components[comp]
        if port not in c.ports:
            raise ConfigError(f"component {comp} has no port {port!r}")
        return c.port(port)

    def with_scenario(self, scenario, modes: Mapping[str, str] | None = None) -> "PlantGraph":
        """Copy with another scenario and optional per-block mode overrides."""
        import copy

        g = copy.copy(self)
        g.scenario = Scenario.parse(scenario)
        g.inputs = [copy.copy(b) for b in self.inputs]
        g.outputs = [copy.copy(b) for b in self.outputs]
        for b in (*g.inputs, *g.outputs):
            if modes and b.name in modes:
                b.mode = Mode.parse(modes[b.name])
        return g


def connection_equations(src, dst) -> list[Linear]:
    """Equality of pressure, flow, enthalpy and every mass fraction."""
    tag = f"connect({src.path},{dst.path})"
    eqs = [Linear(f"{tag}.p", {src.p: 1.0, dst.p: -1.0}),
           Linear(f"{tag}.w", {src.w: 1.0, dst.w: -1.0}),
           Linear(f"{tag}.h", {src.h: 1.0, dst.h: -1.0})]
    eqs += [Linear(f"{tag}.X[{k}]", {a: 1.0, b: -1.0}) for k, (a, b) in enumerate(zip(src.X, dst.X))]
    return eqs


def flatten(plant: PlantGraph, check: bool = True) -> Model:
    """Collect every component, connection and boundary-block equation."""
    used: dict[str, str] = {}
    pairs = []
    for src, dst in plant.connections:
        a, b = plant.port(src), plant.port(dst)
        if a.direction != "outlet":
            raise ConfigError(f"connection source {src} is not an outlet port")
        if b.direction != "inlet":
            raise ConfigError(f"connection target {dst} is not an inlet port")
        for path in (src, dst):
            if path in used:
                raise ConfigError(f"port {path} connected twice ({used[path]})")
            used[path] = f"{src} -> {dst}"
        pairs.append((a, b))
    for c in plant.components.values():
        for pname in c.ports:
            path = f"{c.name}.{pname}"
            if path not in used:
                raise ConfigError(f"dangling port {path}")

    m = Model(plant.name)
    m.scenario = plant.scenario
    for c in plant.components.values():
        if c.species != plant.species:
            raise ConfigError(f"component {c.name} uses a different species table")
        c.add_ports(m)
    for c in plant.components.values():
        c.contribute(m)
    for a, b in pairs:
        m.add(connection_equations(a, b))

    names_in = {b.name for b in plant.inputs}
    names_out = {b.name for b in plant.outputs}
    if len(names_in) != len(plant.inputs) or len(names_out) != len(plant.outputs):
        raise ConfigError("duplicate boundary block names")
    bnd.validate_balance(plant.inputs, plant.outputs, plant.scenario)
    driven = set()
    for blk in (*plant.inputs, *plant.outputs):
        for v in bnd.block_variables(blk, plant.scenario, plant.normalize):
            m.add_variable(v)
        eqs, init = bnd.emit_equations(blk, plant.scenario, plant.normalize)
        m.add(eqs)
        m.add(init)
        if isinstance(blk, InputBlock):
            if blk.target not in m.variables:
                raise ConfigError(f"input block {blk.name}: unknown target {blk.target}")
            if blk.target in driven:
                raise ConfigError(f"signal {blk.target} driven by two input blocks")
            driven.add(blk.target)
            m.add_equation(Linear(f"signal({blk.name})", {blk.target: 1.0, blk.names["u_out"]: -1.0},
                                  nominal=m.variables[blk.target].nominal))
        else:
            if blk.sensor not in m.variables:
                raise ConfigError(f"output block {blk.name}: unknown sensor {blk.sensor}")
            m.add_equation(Linear(f"signal({blk.name})", {blk.names["y_in"]: 1.0, blk.sensor: -1.0},
                                  nominal=m.variables[blk.sensor].nominal))
    # actuator signals without an input block keep their design setpoint
    for c in plant.components.values():
        for sig in getattr(c, "signals", {}).values():
            if sig not in driven:
                v = m.variables[sig]
                m.add_equation(Fix(f"{sig}.setpoint", sig, v.start, nominal=v.nominal))
    m.meta["plant"] = plant
    if check:
        assemble_problem(m, "init", check=True)
        consts = {v.name: v.start for v in m.variables.values()
                  if v.role in (Role.STATE, Role.UNKNOWN_PARAMETER)}
        assemble_problem(m, "sim", constants=consts, check=True)
    return m


# ---------------------------------------------------------------------------
# configuration I/O


def _loss(d) -> PressureLossParams:
    return PressureLossParams(float(d["dp_nom"]), float(d.get("loss_w_nom", d["w_nom"])),
                              float(d.get("rho_nom", 1.0)), d.get("law", "quadratic"))


def _side(d) -> HxSide:
    return HxSide(float(d["V"]), float(d["S"]), float(d["gamma_nom"]), float(d["w_nom"]),
                  float(d["p_nom"]), _loss(d))


def _build(kind: str, name: str, p: dict, design, species) -> Component:
    kw = {"design": design, "species": species}
    if kind == "source":
        return Source(name, p["w"], p["T"], p["X"], **kw)
    if kind == "sink":
        return Sink(name, p["p"], **kw)
    if kind == "pressure_loss":
        return PressureLoss(name, _loss(p), **kw)
    if kind == "decoupler":
        par = DecouplerParams(p["h_des"], list(p["X_des"])) if p else None
        return Decoupler(name, par, **kw)
    if kind == "turbine":
        return Turbine(name, TurbineParams(p["K_t"], p["eta"], p["w_nom"], p["p_nom"]), **kw)
    if kind == "compressor":
        return Compressor(name, p["beta"], p["eta"], **kw)
    if kind == "intercooler":
        return Intercooler(name, p["V"], p["T_out"], _loss(p), **kw)
    if kind == "condenser":
        extra = {"coeffs": tuple(p["coeffs"])} if "coeffs" in p else {}
        return Condenser(name, CondenserParams(p["V"], p["T"], **extra), _loss(p), **kw)
    if kind == "combustor":
        return Combustor(name, p["V"], _loss(p), **kw)
    if kind == "heat_exchanger":
        lay = HxModule(int(p.get("volumes", 3)), int(p.get("modules", 2)),
                       float(p.get("wall_capacitance", 5e3)))
        return HeatExchanger(name, _side(p["hot"]), _side(p["cold"]), lay, **kw)
    if kind == "fuel_cell":
        return FuelCell(name, FuelCellParams.from_dict(p), **kw)
    raise ConfigError(f"unknown component type {kind!r}")


def plant_from_dict(cfg: Mapping) -> PlantGraph:
    if not isinstance(cfg, Mapping):
        raise ConfigError("plant configuration must be a JSON object")
    try:
        schema = cfg.get("schema", SCHEMA)
        if schema != SCHEMA:
            raise ConfigError(f"unsupported configuration schema {schema!r}")
        species = SpeciesTable.from_list(cfg["species"]) if cfg.get("species") else DEFAULT_SPECIES
        g = PlantGraph(scenario=Scenario.parse(cfg.get("scenario", Scenario.STEADY_ON.value)),
                       normalize=bool(cfg.get("normalize", False)), species=species,
                       solver=dict(cfg.get("solver", {})), name=cfg.get("name", "plant"))
        for c in cfg["components"]:
            design = {k: PortDesign.from_dict(v) for k, v in c.get("design", {}).items()}
            g.add(_build(c["type"], c["name"], dict(c.get("params", {})), design, species))
        for src, dst in cfg.get("connections", []):
            g.connect(src, dst)
        g.inputs = [InputBlock(**b) for b in cfg.get("inputs", [])]
        g.outputs = [OutputBlock(**b) for b in cfg.get("outputs", [])]
    except InitError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid plant configuration: {exc!r}") from exc
    return g


def plant_to_dict(g: PlantGraph) -> dict:
    return {
        "schema": SCHEMA,
        "name": g.name,
        "scenario": g.scenario.value,
        "normalize": g.normalize,
        "species": g.species.to_list(),
        "solver": dict(g.solver),
        "components": [{"name": c.name, "type": c.kind, "params": c.params_dict(),
                        "design": {k: d.to_dict() for k, d in c.design.items()}}
                       for c in g.components.values()],
        "connections": [list(c) for c in g.connections],
        "inputs": [b.to_dict() for b in g.inputs],
        "outputs": [b.to_dict() for b in g.outputs],
    }


def load_plant(path) -> PlantGraph:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration {path} is not valid JSON: {exc}") from exc
    return plant_from_dict(cfg)


def save_plant(g: PlantGraph, path):
    Path(path).write_text(json.dumps(plant_to_dict(g), indent=1, sort_keys=False) + "\n")


DEMO_CONFIG = Path(__file__).with_name("data") / "demo_plant.json"


def build_demo_plant() -> PlantGraph:
    """Desk-scale recuperated oxy-cycle with an internal-reforming fuel cell."""
    return load_plant(DEMO_CONFIG)


# ---------------------------------------------------------------------------
# post-processing


def port_values(plant: PlantGraph, solution: Mapping[str, float]):
    """Yield ``(path, p, w, h, X list)`` for every port."""
    for c in plant.components.values():
        for pname, port in c.ports.items():
            yield (f"{c.name}.{pname}", solution[port.p], solution[port.w], solution[port.h],
                   [solution[x] for x in port.X])


def boundary_flows(plant: PlantGraph, solution: Mapping[str, float]) -> tuple[float, float]:
    """(mass in through sources, mass out through sinks and condensate drains)."""
    w_in = sum(solution[c.port("outlet").w] for c in plant.components.values() if isinstance(c, Source))
    w_out = sum(solution[c.port("inlet").w] for c in plant.components.values() if isinstance(c, Sink))
    w_out += sum(solution[c.liquid] for c in plant.components.values() if isinstance(c, Condenser))
    return w_in, w_out


def energy_balance(plant: PlantGraph, solution: Mapping[str, float]) -> dict:
    """Enthalpy flows (formation-enthalpy basis) entering and leaving the plant.

    ``inflow`` is the sum over sources; ``outflow`` collects sinks, the
    condensate, shaft and electric power and heat rejected by coolers.
    """
    inflow = sum(solution[c.port("outlet").w] * solution[c.port("outlet").h]
                 for c in plant.components.values() if isinstance(c, Source))
    parts = {"exhaust": 0.0, "condensate": 0.0, "shaft": 0.0, "electric": 0.0, "heat_rejected": 0.0}
    for c in plant.components.values():
        if isinstance(c, Sink):
            parts["exhaust"] += solution[c.port("inlet").w] * solution[c.port("inlet").h]
        elif isinstance(c, Condenser):
            parts["condensate"] += solution[c.liquid] * c.liquid_enthalpy()
            parts["heat_rejected"] += solution[c.heat]
        elif isinstance(c, Intercooler):
            parts["heat_rejected"] += solution[c.heat]
        elif isinstance(c, Turbine):
            parts["shaft"] += solution[c.power]
        elif isinstance(c, Compressor):
            parts["shaft"] -= solution[c.power]
        elif isinstance(c, FuelCell):
            parts["electric"] += solution[c.power]
    outflow = math.fsum(parts.values())
    return {"inflow": inflow, "outflow": outflow, **parts}
