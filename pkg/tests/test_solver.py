import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ssinit.eqsys import FULL, Equation, Linear, Model, Phase, Role, assemble_problem, residual_eval
from ssinit.errors import ConvergenceError, DomainError, HomotopyStalledError, VerificationError
from ssinit.solver import (HomotopySchedule, SolverConfig, _Block, continuation, newton_solve, scale,
                           solve_sequence, verify_steady_state, whole_component)
from ssinit.structure import blt_decompose


def _model(residuals, starts, nominals=None, eliminate=False):
    m = Model()
    for k, s in enumerate(starts):
        m.var(f"x{k}", start=s, nominal=(nominals or [1.0] * len(starts))[k])
    for k, fn in enumerate(residuals):
        m.add_equation(Equation(f"r{k}", fn))
    return m, assemble_problem(m, eliminate=eliminate)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-5, 5), min_size=n * n, max_size=n * n),
    st.lists(st.floats(-10, 10), min_size=n, max_size=n))))
def test_affine_system_converges_in_one_iteration(case):
    a, b = case
    n = len(b)
    assume(max(abs(v) for v in b) > 1e-3)   # a zero start would already be the solution
    A = np.array(a).reshape(n, n) + 8.0 * np.eye(n)   # diagonally dominant, well conditioned
    res = [lambda v, i=i: sum(A[i, j] * v[f"x{j}"] for j in range(n)) - b[i] for i in range(n)]
    _, p = _model(res, [0.0] * n)
    x, info = newton_solve(whole_component(p), p, p.start_vector(), return_info=True)
    assert info.iterations == 1
    assert np.allclose(A @ x, b, atol=1e-9)


def test_damped_newton_on_arctan():
    # undamped Newton diverges from x0 = 3 on atan(x) = 0
    _, p = _model([lambda v: math.atan(v["x0"])], [3.0])
    x, info = newton_solve(whole_component(p), p, [3.0], return_info=True)
    assert abs(x[0]) < 1e-8
    assert info.damping_events > 0


def test_bounds_are_respected():
    m = Model()
    m.var("x", start=1.0, min=0.5, max=10.0)
    m.add_equation(Equation("r", lambda v: v["x"] ** 2 - 4.0))
    p = assemble_problem(m)
    x = newton_solve(whole_component(p), p, [1.0])
    assert x[0] == pytest.approx(2.0)


def test_singular_start_is_nudged():
    # x + y = 3, x y = 2 from (1.5, 1.5) where the Jacobian is singular
    res = [lambda v: v["x0"] + v["x1"] - 3.0, lambda v: v["x0"] * v["x1"] - 2.0]
    _, p = _model(res, [1.5, 1.5])
    x = newton_solve(whole_component(p), p, [1.5, 1.5])
    assert sorted(np.round(x, 9)) == [1.0, 2.0]


def test_nonconvergence_raises_with_best_iterate():
    _, p = _model([lambda v: v["x0"] ** 2 + 1.0], [0.3])
    with pytest.raises(ConvergenceError) as err:
        newton_solve(whole_component(p), p, [0.3], SolverConfig(max_iterations=5))
    assert err.value.best is not None


def test_rejects_non_finite_guess():
    _, p = _model([lambda v: v["x0"]], [0.0])
    with pytest.raises(DomainError):
        newton_solve(whole_component(p), p, [float("nan")])


@pytest.mark.parametrize("factor", [1e3, 1e-3])
def test_nominal_rescaling_does_not_move_solution(factor):
    res = [lambda v: math.exp(v["x0"]) + v["x1"] - 3.0,
           lambda v: v["x0"] ** 3 + 2.0 * v["x1"] - 1.0]
    tol = 1e-8
    cfg = SolverConfig(residual_tol=tol)
    _, p1 = _model(res, [0.5, 0.5])
    _, p2 = _model(res, [0.5, 0.5], nominals=[factor, factor])
    x1 = newton_solve(whole_component(p1), p1, [0.5, 0.5], cfg)
    x2 = newton_solve(whole_component(p2), p2, [0.5, 0.5], cfg)
    assert np.max(np.abs(x1 - x2)) <= 10 * tol


ANALYTIC = [
    (lambda x: [x[0] ** 2 * x[1] - 1.0, math.sin(x[0]) + x[1] ** 3]),
    (lambda x: [math.exp(x[0] - x[1]), x[0] * math.log(1.0 + x[1] ** 2)]),
    (lambda x: [x[0] / (1.0 + x[1] ** 2), math.cosh(x[0]) * x[1]]),
]


@pytest.mark.parametrize("f", ANALYTIC)
@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(0.2, 2.0))
def test_forward_difference_jacobian_matches_central(f, a, b):
    res = [lambda v, i=i: f([v["x0"], v["x1"]])[i] for i in range(2)]
    _, p = _model(res, [a, b])
    sc = scale(p, [a, b], 1.0, FULL)
    blk = _Block(p, [0, 1], [0, 1], FULL, sc)
    ctx = p.context(np.array([a, b]), 1.0)
    J = blk.jacobian(ctx, blk.raw(ctx)) * sc.row_scale[:, None] / sc.x_scale[None, :]
    C = np.zeros((2, 2))
    for k in range(2):
        h = 1e-5
        xp, xm = [a, b], [a, b]
        xp[k] += h
        xm[k] -= h
        C[:, k] = (np.array(f(xp)) - np.array(f(xm))) / (2 * h)
    scale_ = max(np.max(np.abs(C)), 1e-12)
    assert np.max(np.abs(J - C)) / scale_ <= 1e-5


def test_row_scaling_uses_jacobian_row_norm():
    _, p = _model([lambda v: 1e6 * v["x0"] - 1.0], [0.0])
    sc = scale(p, [0.0])
    assert sc.row_scale[0] == pytest.approx(1e6, rel=1e-6)


def _homotopy_problem():
    m = Model()
    m.var("x", start=0.0)
    m.var("y", start=0.0)
    m.add_equation(Equation("ex", lambda v: v["x"] - v.hom(lambda: math.cos(v["y"]), 0.5)))
    m.add_equation(Equation("ey", lambda v: v["y"] - v.hom(lambda: 0.5 * v["x"] ** 2, 0.0) - 0.1))
    return m, assemble_problem(m)


def test_continuation_trace_properties():
    _, p = _homotopy_problem()
    tr = continuation(p)
    lams = tr.lambdas
    assert lams[0] == 0.0 and lams[-1] == 1.0
    assert all(b > a for a, b in zip(lams, lams[1:]))
    x = tr.solution
    assert np.max(np.abs(residual_eval(p, x, 1.0))) < 1e-8
    # every snapshot solves its own lambda
    for lam, snap in zip(lams, tr.snapshots):
        assert np.max(np.abs(residual_eval(p, snap, lam))) < 1e-7


def test_lambda_zero_structure_splits():
    _, p = _homotopy_problem()
    o0 = blt_decompose(p, "simplified")
    o1 = blt_decompose(p, FULL)
    assert o0.sizes == [1, 1] and o1.sizes == [2]


def test_turning_point_stalls_with_diagnostic():
    # x^2 + lambda = 0.5 has no real root beyond lambda = 0.5
    m = Model()
    m.var("x", start=1.0)
    m.add_equation(Equation("fold", lambda v: v["x"] ** 2 - 0.5 + v.hom(1.0, 0.0)))
    p = assemble_problem(m)
    with pytest.raises(HomotopyStalledError) as err:
        continuation(p, HomotopySchedule(initial_step=0.1, min_step=1e-3))
    assert "stalled" in str(err.value)
    assert err.value.lam is not None and err.value.lam <= 0.5


def test_schedule_validation():
    with pytest.raises(DomainError):
        HomotopySchedule(initial_step=0.0)
    with pytest.raises(DomainError):
        SolverConfig(contraction=1.5)


def test_tearing_and_full_newton_agree():
    res = [lambda v: v["x0"] - math.cos(v["x1"]),
           lambda v: v["x1"] - 0.5 * math.sin(v["x2"]),
           lambda v: v["x2"] - v["x0"] ** 2 - 0.1]
    _, p = _model(res, [0.5, 0.5, 0.5])
    a = solve_sequence(blt_decompose(p, FULL, tearing=True), p, p.start_vector(), 1.0,
                       SolverConfig(use_tearing=True))
    b = solve_sequence(blt_decompose(p, FULL), p, p.start_vector(), 1.0,
                       SolverConfig(use_tearing=False))
    assert np.max(np.abs(a - b)) < 1e-8


def _decay_model():
    m = Model()
    m.var("x", role=Role.STATE, start=1.0)
    m.var("dx", der_of="x")
    m.var("u", role=Role.FIXED, value=2.0)
    m.add_equation(Linear("ode", {"dx": 1.0, "x": 1.0, "u": -1.0}))
    m.add_equation(Linear("steady", {"dx": 1.0}, phase=Phase.INITIAL))
    return m


def test_verify_steady_state_zero_drift_at_equilibrium():
    m = _decay_model()
    p = assemble_problem(m, "init")
    sol = p.full_solution(continuation(p).solution)
    assert sol["x"] == pytest.approx(2.0)
    assert verify_steady_state(m, sol) <= 1e-12


def test_verify_steady_state_detects_perturbation():
    m = _decay_model()
    p = assemble_problem(m, "init")
    sol = p.full_solution(continuation(p).solution)
    drift = verify_steady_state(m, sol, perturb={"x": 2.5})
    # implicit Euler relaxes towards 2 from 2.5: drift measured against the perturbed start
    assert drift > 0.1


def test_verify_rejects_bad_horizon():
    m = _decay_model()
    with pytest.raises(DomainError):
        verify_steady_state(m, {"x": 2.0, "dx": 0.0, "u": 2.0}, horizon=0.0)
