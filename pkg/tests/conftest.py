import math

import pytest

from ssinit.eqsys import assemble_initialization_problem
from ssinit.plant import build_demo_plant, flatten
from ssinit.solver import continuation

# IAPWS-IF97 region-4 saturation line, used as an independent oracle
_IF97 = (0.11670521452767e4, -0.72421316703206e6, -0.17073846940092e2, 0.12020824702470e5,
         -0.32325550322333e7, 0.14915108613530e2, -0.48232657361591e4, 0.40511340542057e6,
         -0.23855557567849, 0.65017534844798e3)


def if97_psat(T: float) -> float:
    n = _IF97
    th = T + n[8] / (T - n[9])
    A = th * th + n[0] * th + n[1]
    B = n[2] * th * th + n[3] * th + n[4]
    C = n[5] * th * th + n[6] * th + n[7]
    return (2.0 * C / (-B + math.sqrt(B * B - 4.0 * A * C))) ** 4 * 1e6


class Solved:
    def __init__(self, plant):
        self.plant = plant
        self.model = flatten(plant)
        self.problem = assemble_initialization_problem(self.model)
        self.trace = continuation(self.problem)
        self.solution = self.problem.full_solution(self.trace.solution)


@pytest.fixture(scope="session")
def demo_on():
    return Solved(build_demo_plant())


@pytest.fixture(scope="session")
def demo_off_bwd(demo_on):
    from ssinit.boundary import warm_start_backward

    g = build_demo_plant().with_scenario("steady-off", {"fuel_flow": "bwd", "turbine_power": "bwd"})
    g.output("turbine_power").y_offdes = 0.8 * g.output("turbine_power").y_des
    s = Solved.__new__(Solved)
    s.plant = g
    s.model = flatten(g)
    s.problem = assemble_initialization_problem(s.model)
    warm_start_backward(demo_on.solution, s.problem)
    s.trace = continuation(s.problem)
    s.solution = s.problem.full_solution(s.trace.solution)
    return s


def pipe_plant(species=None, decoupler=False, **block_kw):
    """Source -> pipe -> sink with a flow input paired with the inlet-pressure output."""
    from ssinit.boundary import InputBlock, OutputBlock
    from ssinit.components import Decoupler, PortDesign, PressureLoss, PressureLossParams, Sink, Source
    from ssinit.media import DEFAULT_SPECIES
    from ssinit.plant import PlantGraph

    sp = species or DEFAULT_SPECIES
    X = {sp.names[-1]: 1.0}
    d_hi, d_lo = PortDesign(1.2e5, 0.1, 400.0, X), PortDesign(1.0e5, 0.1, 400.0, X)
    g = PlantGraph(species=sp, name="pipe")
    g.add(Source("src", 0.1, 400.0, X, species=sp, design={"outlet": d_hi}))
    upstream = "src.outlet"
    if decoupler:
        g.add(Decoupler("dec", species=sp, design={"inlet": d_hi, "outlet": d_hi}))
        g.connect("src.outlet", "dec.inlet")
        upstream = "dec.outlet"
    g.add(PressureLoss("pipe", PressureLossParams(2e4, 0.1, 1.0), species=sp,
                       design={"inlet": d_hi, "outlet": d_lo}))
    g.add(Sink("out", 1.0e5, species=sp, design={"inlet": d_lo}))
    g.connect(upstream, "pipe.inlet")
    g.connect("pipe.outlet", "out.inlet")
    g.inputs = [InputBlock("flow", "src.w_set", 0.1, partner="p_in", u_norm=0.1,
                           mode=block_kw.get("mode", "fwd"))]
    g.outputs = [OutputBlock("p_in", "pipe.inlet.p", block_kw.get("y_des", 1.2e5),
                             y_offdes=block_kw.get("y_offdes"), mode=block_kw.get("mode", "fwd"),
                             y_norm=1e4)]
    return g


def solve_plant(g, warm=None):
    from ssinit.boundary import warm_start_backward

    s = Solved.__new__(Solved)
    s.plant = g
    s.model = flatten(g)
    s.problem = assemble_initialization_problem(s.model)
    if warm is not None:
        warm_start_backward(warm, s.problem)
    s.trace = continuation(s.problem)
    s.solution = s.problem.full_solution(s.trace.solution)
    return s


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
