import json
import math

import numpy as np
import pytest

from conftest import pipe_plant, solve_plant
from ssinit.components import Combustor, HeatExchanger, atom_flows
from ssinit.eqsys import SIMPLIFIED, Role, assemble_initialization_problem, assemble_problem
from ssinit.errors import ConfigError
from ssinit.media import DEFAULT_SPECIES_DATA, SpeciesTable
from ssinit.plant import (boundary_flows, build_demo_plant, energy_balance, flatten, load_plant,
                          plant_from_dict, plant_to_dict, port_values, save_plant)
from ssinit.structure import blt_decompose

NITROGEN = SpeciesTable([s for s in DEFAULT_SPECIES_DATA if s.name == "N2"])


def test_connection_equation_count_single_species():
    m = flatten(pipe_plant(species=NITROGEN))
    conn = [e for e in m.equations if e.name.startswith("connect(")]
    assert len(conn) == 2 * 4


def test_connection_equation_count_scales_with_species():
    m = flatten(pipe_plant())
    conn = [e for e in m.equations if e.name.startswith("connect(")]
    assert len(conn) == 2 * (3 + len(DEFAULT_SPECIES_DATA))


def test_dangling_port_is_named():
    g = pipe_plant()
    g.connections.pop()
    with pytest.raises(ConfigError, match="pipe.outlet"):
        flatten(g)


def test_port_connected_twice():
    g = pipe_plant()
    g.connect("pipe.outlet", "out.inlet")
    with pytest.raises(ConfigError, match="connected twice"):
        flatten(g)


def test_connection_direction_is_checked():
    g = pipe_plant()
    g.connections[0] = ("pipe.inlet", "src.outlet")
    with pytest.raises(ConfigError, match="not an outlet"):
        flatten(g)


def test_unknown_port_and_component():
    g = pipe_plant()
    with pytest.raises(ConfigError, match="no port"):
        g.port("pipe.middle")
    with pytest.raises(ConfigError, match="unknown component"):
        g.port("valve.inlet")
    with pytest.raises(ConfigError, match="duplicate"):
        g.add(g.components["pipe"])


def test_unknown_sensor_and_double_drive():
    g = pipe_plant()
    g.outputs[0].sensor = "pipe.nowhere"
    with pytest.raises(ConfigError, match="unknown sensor"):
        flatten(g)
    g = pipe_plant()
    g.inputs.append(type(g.inputs[0])("flow2", "src.w_set", 0.1))
    g.outputs.append(type(g.outputs[0])("p2", "pipe.outlet.p", 1e5))
    with pytest.raises(ConfigError, match="driven by two"):
        flatten(g)


def test_mixed_species_tables_rejected():
    g = pipe_plant()
    g.species = NITROGEN
    with pytest.raises(ConfigError, match="species"):
        flatten(g)


def test_decoupler_is_identity_at_full_lambda():
    a = solve_plant(pipe_plant())
    b = solve_plant(pipe_plant(decoupler=True))
    for name, val in a.solution.items():
        assert b.solution[name] == pytest.approx(val, rel=1e-10, abs=1e-14)


def test_demo_plant_is_square_in_both_phases():
    m = flatten(build_demo_plant())
    init = assemble_initialization_problem(m)
    assert init.n == len(init.equations)
    consts = {v.name: v.start for v in m.variables.values()
              if v.role in (Role.STATE, Role.UNKNOWN_PARAMETER)}
    sim = assemble_problem(m, "sim", constants=consts)
    assert sim.n == len(sim.equations)
    assert 100 <= init.n <= 1000


def test_demo_simplified_blt_splits():
    p = assemble_initialization_problem(flatten(build_demo_plant()))
    assert len(blt_decompose(p, SIMPLIFIED)) > 1


def _max_port_sum_error(plant, sol):
    return max(abs(math.fsum(X) - 1.0) for *_, X in port_values(plant, sol))


def test_demo_compositions_close(demo_on, demo_off_bwd):
    for s in (demo_on, demo_off_bwd):
        assert _max_port_sum_error(s.plant, s.solution) <= 1e-12


def test_demo_connection_continuity(demo_on):
    sol, g = demo_on.solution, demo_on.plant
    for src, dst in g.connections:
        a, b = g.port(src), g.port(dst)
        for qa, qb in zip(a.quantities(), b.quantities()):
            scale_ = max(abs(sol[qa]), demo_on.model.variables[qa].nominal)
            assert abs(sol[qa] - sol[qb]) / scale_ <= 1e-10


def test_demo_mass_and_energy_closure(demo_on, demo_off_bwd):
    for s in (demo_on, demo_off_bwd):
        w_in, w_out = boundary_flows(s.plant, s.solution)
        assert abs(w_in - w_out) / w_in <= 1e-8
        e = energy_balance(s.plant, s.solution)
        assert abs(e["inflow"] - e["outflow"]) / abs(e["inflow"]) <= 1e-6


def test_demo_heat_exchanger_closure(demo_on):
    hx = [c for c in demo_on.plant.components.values() if isinstance(c, HeatExchanger)]
    assert hx
    for c in hx:
        drop, rise = c.enthalpy_flows(demo_on.solution)
        assert abs(drop - rise) / abs(drop) <= 1e-8


def test_demo_combustor_atom_balance(demo_on):
    sol, sp = demo_on.solution, demo_on.plant.species
    for c in demo_on.plant.components.values():
        if not isinstance(c, Combustor):
            continue
        a_in = {}
        for pname in ("fuel", "oxidant"):
            port = c.port(pname)
            for el, n in atom_flows(sol[port.w], [sol[x] for x in port.X], sp).items():
                a_in[el] = a_in.get(el, 0.0) + n
        o = c.port("outlet")
        a_out = atom_flows(sol[o.w], [sol[x] for x in o.X], sp)
        # relative to the total atom flow: absent species carry closure round-off
        total = math.fsum(a_in.values())
        for el, n in a_in.items():
            assert abs(a_out[el] - n) / total <= 1e-12


def test_json_round_trip(tmp_path):
    g = build_demo_plant()
    d = plant_to_dict(g)
    assert plant_to_dict(plant_from_dict(json.loads(json.dumps(d)))) == d
    path = tmp_path / "plant.json"
    save_plant(g, path)
    assert plant_to_dict(load_plant(path)) == d


def test_round_tripped_pipe_solves_identically(tmp_path):
    g = pipe_plant()
    save_plant(g, tmp_path / "pipe.json")
    a = solve_plant(g)
    b = solve_plant(load_plant(tmp_path / "pipe.json"))
    assert np.array_equal(a.trace.solution, b.trace.solution)


@pytest.mark.parametrize("text", ["{not json", json.dumps({"schema": "other"}), json.dumps([])])
def test_bad_config_files(tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_plant(path)
    with pytest.raises(ConfigError):
        load_plant(tmp_path / "missing.json")
