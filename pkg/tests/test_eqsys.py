import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssinit.eqsys import (FULL, SIMPLIFIED, DerivativeBalance, Equation, Fix, Linear, Model, Phase,
                          Role, Variable, assemble_initialization_problem, assemble_problem,
                          euler_problem, homotopy_combine, residual_eval)
from ssinit.errors import DomainError, EvaluationError, StructuralSingularityError

unit = st.floats(0.0, 1.0)
finite = st.floats(-1e6, 1e6)


@given(finite, finite, unit)
def test_homotopy_combine_is_convex_blend(a, s, lam):
    v = homotopy_combine(a, s, lam)
    assert min(a, s) - 1e-9 * (abs(a) + abs(s)) <= v <= max(a, s) + 1e-9 * (abs(a) + abs(s))


@given(finite, finite)
def test_homotopy_endpoints_exact(a, s):
    assert homotopy_combine(a, s, 0.0) == s
    assert homotopy_combine(a, s, 1.0) == a


def test_homotopy_rejects_out_of_range():
    with pytest.raises(DomainError):
        homotopy_combine(1.0, 0.0, 1.5)


def test_variable_validation():
    with pytest.raises(DomainError):
        Variable("x", nominal=0.0)
    with pytest.raises(DomainError):
        Variable("x", start=5.0, max=1.0)
    with pytest.raises(DomainError):
        Variable("p", role=Role.FIXED)
    assert Variable("p", role=Role.FIXED, value=3.0).start == 3.0


def _chain():
    m = Model()
    for n in ("a", "b", "c"):
        m.var(n)
    m.add_equation(Fix("fa", "a", 2.0))
    m.add_equation(Linear("ab", {"a": 1.0, "b": -1.0}))
    m.add_equation(Equation("c", lambda v: v["c"] ** 2 - v["b"]))
    return m


def test_fix_and_alias_are_eliminated():
    p = assemble_problem(_chain())
    assert p.n == 1 and len(p.equations) == 1
    assert p.eliminated["fa"] == "fixes a"
    assert p.value_of("b", np.array([0.0])) == 2.0


def test_without_elimination_problem_keeps_all_equations():
    p = assemble_problem(_chain(), eliminate=False)
    assert p.n == 3 and len(p.equations) == 3


def test_alias_prefers_state_as_representative():
    m = Model()
    m.var("y")
    m.var("x", role=Role.STATE, start=1.0)
    m.var("dx", der_of="x")
    m.add_equation(Linear("alias", {"y": 1.0, "x": -1.0}))
    m.add_equation(Linear("ode", {"dx": 1.0, "y": 1.0}))
    m.add_equation(Fix("steady", "dx", 0.0, phase=Phase.INITIAL))
    p = assemble_problem(m, "init", check=False)
    assert "aliases y -> x" in p.eliminated.values()


def test_linear_single_unknown_becomes_constant():
    m = Model()
    m.var("x")
    m.var("y")
    m.add_equation(Linear("lx", {"x": 2.0}, const=-4.0))
    m.add_equation(Equation("ey", lambda v: v["y"] - v["x"] ** 2))
    p = assemble_problem(m)
    assert p.n == 1
    assert p.value_of("x", [0.0]) == 2.0


def test_lambda_dependent_fix_propagates():
    m = Model()
    m.var("x")
    m.var("y")
    m.add_equation(Fix("fx", "x", lambda lam: 1.0 + lam))
    m.add_equation(Linear("xy", {"x": 1.0, "y": 1.0}, const=-10.0))
    p = assemble_problem(m, check=False)
    assert p.n == 0
    assert p.value_of("y", [], lam=0.0) == pytest.approx(9.0)
    assert p.value_of("y", [], lam=1.0) == pytest.approx(8.0)


def test_derivative_balance_collapses_at_steady_state():
    m = Model()
    m.var("T", role=Role.STATE, start=300.0, nominal=300.0)
    m.var("dT", der_of="T")
    m.var("dU")
    m.add_equation(DerivativeBalance("dU_def", "dU", [(lambda v: 2.0 * v["T"], "dT")]))
    m.add_equation(Linear("energy", {"dU": 1.0, "T": 1.0}, const=-310.0))
    m.add_equation(Fix("steady", "dT", 0.0, phase=Phase.INITIAL))
    p = assemble_initialization_problem(m, check=False)
    assert p.eliminated["dU_def"] == "fixes dU = 0"
    assert p.n == 0
    assert p.value_of("T", []) == pytest.approx(310.0)


def test_phase_filtering():
    m = Model()
    m.var("x")
    m.add_equation(Fix("init", "x", 1.0, phase=Phase.INITIAL))
    m.add_equation(Fix("sim", "x", 2.0, phase=Phase.SIMULATION))
    assert assemble_problem(m, "init").value_of("x", []) == 1.0
    assert assemble_problem(m, "sim").value_of("x", []) == 2.0


def test_unknown_parameter_needs_value_outside_init():
    m = Model()
    m.var("k", role=Role.UNKNOWN_PARAMETER)
    m.add_equation(Fix("fk", "k", 1.0, phase=Phase.INITIAL))
    assert assemble_problem(m, "init").value_of("k", []) == 1.0
    with pytest.raises(DomainError):
        assemble_problem(m, "sim")
    assert assemble_problem(m, "sim", constants={"k": 3.0}).value_of("k", []) == 3.0


def test_non_square_problem_raises():
    m = Model()
    m.var("x")
    m.var("y")
    m.add_equation(Equation("e", lambda v: v["x"] * v["y"] - 1.0))
    with pytest.raises(StructuralSingularityError):
        assemble_problem(m)


def test_incidence_regimes_follow_homotopy_branches():
    m = Model()
    for n in ("x", "y"):
        m.var(n, start=1.0)
    m.add_equation(Equation("ex", lambda v: v["x"] - v.hom(lambda: v["y"] ** 2, 1.0)))
    m.add_equation(Equation("ey", lambda v: v["y"] - 2.0 - 0.1 * v["x"]))
    p = assemble_problem(m)
    assert p.incidence(SIMPLIFIED) == [(0,), (0, 1)]
    assert p.incidence(FULL) == [(0, 1), (0, 1)]


def test_residual_endpoints_equal_pure_forms():
    m = Model()
    m.var("x", start=0.7)
    m.add_equation(Equation("e", lambda v: v.hom(lambda: math.exp(v["x"]) - 3.0, lambda: v["x"] - 1.0)))
    p = assemble_problem(m)
    x = np.array([0.7])
    assert residual_eval(p, x, 0.0)[0] == 0.7 - 1.0
    assert residual_eval(p, x, 1.0)[0] == math.exp(0.7) - 3.0


def test_evaluation_error_names_equation():
    m = Model()
    m.var("x", start=-1.0)
    m.add_equation(Equation("logx", lambda v: math.log(v["x"])))
    p = assemble_problem(m, check=False, eliminate=False)
    with pytest.raises(EvaluationError) as err:
        residual_eval(p, np.array([-1.0]), 1.0)
    assert err.value.equation == "logx"


def test_non_finite_residual_is_an_evaluation_error():
    m = Model()
    m.var("x", start=1.0)
    m.add_equation(Equation("inf", lambda v: v["x"] * float("inf")))
    p = assemble_problem(m, check=False)
    with pytest.raises(EvaluationError):
        residual_eval(p, np.array([1.0]), 1.0)


def test_euler_problem_adds_one_step_per_state():
    m = Model()
    m.var("x", role=Role.STATE, start=1.0)
    m.var("dx", der_of="x")
    m.add_equation(Linear("ode", {"dx": 1.0, "x": 1.0}))
    p = euler_problem(m, {"x.prev": 1.0}, dt=0.5)
    # (x - 1)/0.5 = -x  ->  x = 1/3
    from ssinit.solver import newton_solve, whole_component

    x = newton_solve(whole_component(p), p, p.start_vector())
    assert p.value_of("x", x) == pytest.approx(1.0 / 1.5)


def test_full_solution_covers_eliminated_variables():
    p = assemble_problem(_chain())
    sol = p.full_solution(np.array([math.sqrt(2.0)]))
    assert set(sol) == {"a", "b", "c"}
