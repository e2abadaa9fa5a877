import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from ssinit.components import (ATOMS, DecouplerParams, PressureLossParams, TurbineParams,
                               activation_loss, activation_loss_linear, atom_flows,
                               butler_volmer_current, complete_combustion, condensate_flow,
                               condenser_split, decoupler_outlet, exchange_current,
                               fuel_equivalent_current, gas_composition, heat_transfer_coefficient,
                               isentropic_temperature, open_circuit_potential, pressure_loss,
                               stodola_flow, tpb_pressure, turbine_flow)
from ssinit.components.volumes import CondenserParams
from ssinit.errors import DomainError, EvaluationError
from ssinit.media import DEFAULT_SPECIES, FARADAY, R, MixtureState, p_sat

SP = DEFAULT_SPECIES
NAMES = SP.names


def _X(**moles):
    return SP.mass_fractions([moles.get(n, 0.0) for n in NAMES])


# -- pressure loss ---------------------------------------------------------

def test_quadratic_loss_hits_nominal_and_blends():
    par = PressureLossParams(4e3, 0.12, 3.3)
    assert pressure_loss(0.12, 3.3, par, 1.0) == pytest.approx(4e3)
    assert pressure_loss(0.12, 3.3, par, 0.0) == pytest.approx(4e3)
    assert pressure_loss(0.06, 3.3, par, 1.0) == pytest.approx(1e3)
    assert pressure_loss(0.06, 3.3, par, 0.0) == pytest.approx(2e3)
    assert pressure_loss(-0.06, 3.3, par, 1.0) == pytest.approx(-1e3)


def test_loss_params_validation():
    with pytest.raises(DomainError):
        PressureLossParams(-1.0, 1.0)
    with pytest.raises(DomainError):
        PressureLossParams(1.0, 1.0, law="cubic")


# -- turbomachinery --------------------------------------------------------

def test_stodola_zero_at_unit_ratio_and_choke_limit():
    assert stodola_flow(3e5, 1.0, 1.0, 1e-3) == 0.0
    big = stodola_flow(3e5, 1.0, 1e6, 1e-3)
    assert big == pytest.approx(1e-3 * math.sqrt(3e5), rel=1e-9)
    with pytest.raises(DomainError):
        stodola_flow(3e5, 1.0, 0.9, 1e-3)


def test_turbine_flow_endpoints():
    par = TurbineParams(2.6e-4, 0.85, 0.127, 2.89e5)
    assert turbine_flow(2.5e5, 1.0, 2.5, par, 0.0) == pytest.approx(0.127 / 2.89e5 * 2.5e5)
    assert turbine_flow(2.5e5, 1.0, 2.5, par, 1.0) == stodola_flow(2.5e5, 1.0, 2.5, 2.6e-4)


def test_isentropic_temperature_matches_entropy_balance():
    # constant cp ideal gas: cp ln(T2/T1) = R ln(p2/p1)
    T2 = isentropic_temperature(1200.0, 3.0, 290.0, 1150.0)
    assert 1150.0 * math.log(T2 / 1200.0) == pytest.approx(290.0 * math.log(1 / 3.0), rel=1e-12)


def test_decoupler_outlet_endpoints():
    par = DecouplerParams(5e5, [0.5, 0.5])
    assert decoupler_outlet(1e5, [0.2, 0.8], par, 0.0) == (5e5, [0.5, 0.5])
    assert decoupler_outlet(1e5, [0.2, 0.8], par, 1.0) == (1e5, [0.2, 0.8])
    with pytest.raises(DomainError):
        DecouplerParams(1.0, [0.3, 0.3])


# -- heat exchanger --------------------------------------------------------

def test_heat_transfer_coefficient_scaling():
    assert heat_transfer_coefficient(100.0, 0.1, 0.1, 2e5, 2e5) == pytest.approx(100.0)
    assert heat_transfer_coefficient(100.0, 0.2, 0.1, 2e5, 2e5) == pytest.approx(100.0 * 2**0.8)
    assert heat_transfer_coefficient(100.0, -0.1, 0.1, 2e5, 2e5) == 0.0


# -- condenser -------------------------------------------------------------

def test_dry_inlet_has_no_condensate():
    X = _X(CO2=0.9, O2=0.1)
    assert condensate_flow(3e5, 303.0, 0.1, X, SP) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.floats(1.5e5, 5e5), st.floats(295.0, 330.0), st.floats(0.0, 0.15))
def test_flash_leaves_saturated_gas(p, T, y_w):
    X = _X(CO2=0.88 - y_w, O2=0.12, H2O=y_w)
    w_liq = condensate_flow(p, T, 0.1, X, SP)
    y_sat = p_sat(T) / p
    y_out = SP.mole_fractions(gas_composition(0.1, X, w_liq, SP))[SP.index["H2O"]]
    if w_liq > 0:
        assert y_out == pytest.approx(y_sat, rel=1e-9)
    else:
        assert y_out <= y_sat * (1 + 1e-12)


@settings(max_examples=80, deadline=None)
@given(st.floats(1.5e5, 5e5), st.floats(295.0, 330.0), st.floats(0.0, 0.10))
def test_condenser_homotopy_gas_flow_gap(p, T, y_w):
    X = _X(CO2=0.88 - y_w, O2=0.12, H2O=y_w)
    state = MixtureState(p, T, tuple(X))
    par = CondenserParams(0.05, T)
    g0, liq, _ = condenser_split(state, 0.1, par, 0.0)
    g1, _, _ = condenser_split(state, 0.1, par, 1.0)
    assume(liq / 0.1 <= 0.03)
    assert abs(g0 - g1) / g1 <= 0.05


# -- combustor -------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5), st.floats(0.0, 2.0),
       st.floats(1e-3, 0.5), st.floats(1e-3, 0.5))
def test_complete_combustion_conserves_atoms(fuel, excess, w_f, w_o):
    ch4, h2, h2o, co, co2 = fuel
    assume(ch4 + h2 + co > 1e-3)
    Xf = _X(CH4=ch4, H2=h2, H2O=h2o + 1e-3, CO=co, CO2=co2)
    nf = [w_f * x * im for x, im in zip(Xf, SP.inv_M)]
    need = 2 * nf[0] + 0.5 * nf[1] + 0.5 * nf[3]
    o2_mass = need * (1.0 + excess) * SP.M[SP.index["O2"]]
    co2_mass = max(w_o - o2_mass, 1e-6)
    w_ox = o2_mass + co2_mass
    Xo = [0.0] * len(NAMES)
    Xo[SP.index["O2"]] = o2_mass / w_ox
    Xo[SP.index["CO2"]] = co2_mass / w_ox
    w, Xout = complete_combustion([w_f, w_ox], [Xf, Xo], SP)
    assert w == pytest.approx(w_f + w_ox, rel=1e-15)
    a_in = {}
    for ww, XX in ((w_f, Xf), (w_ox, Xo)):
        for el, n in atom_flows(ww, XX, SP).items():
            a_in[el] = a_in.get(el, 0.0) + n
    a_out = atom_flows(w, Xout, SP)
    for el, n in a_in.items():
        if n > 0:
            assert abs(a_out.get(el, 0.0) - n) / n <= 1e-12
    assert Xout[SP.index["CH4"]] == Xout[SP.index["H2"]] == Xout[SP.index["CO"]] == 0.0


def test_combustion_without_oxygen_raises():
    Xf = _X(CH4=1.0)
    Xo = _X(CO2=1.0)
    with pytest.raises(DomainError, match="sub-stoichiometric"):
        complete_combustion([0.01, 0.1], [Xf, Xo], SP)


def test_atom_table_covers_species():
    assert set(ATOMS) >= set(NAMES)


# -- fuel cell -------------------------------------------------------------

def test_open_circuit_potential_at_1000K():
    # JANAF: Gibbs energy of formation of water vapour at 1000 K is -192.590 kJ/mol
    assert open_circuit_potential(1000.0, 1e5, 1e5, 1e5) == pytest.approx(192590 / (2 * FARADAY), rel=5e-3)


def test_nernst_slope():
    T = 1050.0
    e1 = open_circuit_potential(T, 2e4, 5e4, 2e4)
    e2 = open_circuit_potential(T, 4e4, 5e4, 2e4)
    assert e2 - e1 == pytest.approx(R * T / (2 * FARADAY) * math.log(2.0), rel=1e-12)
    with pytest.raises(EvaluationError):
        open_circuit_potential(T, 0.0, 5e4, 2e4)


GRID = [(j, j0, T) for j in np.geomspace(10.0, 2e4, 5) for j0 in np.geomspace(50.0, 5e3, 5)
        for T in (900.0, 1000.0, 1100.0, 1200.0)]


def test_asinh_activation_matches_implicit_butler_volmer():
    assert len(GRID) == 100
    worst = 0.0
    for j, j0, T in GRID:
        e = brentq(lambda x: butler_volmer_current(x, j0, T) - j, 0.0, 5.0, xtol=1e-15, rtol=1e-15)
        worst = max(worst, abs(activation_loss(j, j0, T) - e) / e)
    assert worst <= 1e-10


@pytest.mark.parametrize("T", [900.0, 1100.0])
def test_linear_activation_close_at_small_current(T):
    for j0 in (100.0, 1e3):
        for j in np.linspace(1e-3, 0.1 * j0, 50):
            full = activation_loss(j, j0, T)
            assert abs(activation_loss_linear(j, j0, T) - full) / full <= 0.01


def test_exchange_current_is_arrhenius():
    j1 = exchange_current(1000.0, 1e9, 1.2e5)
    j2 = exchange_current(1100.0, 1e9, 1.2e5)
    assert j2 / j1 == pytest.approx(1.1 * math.exp(1.2e5 / R * (1 / 1000.0 - 1 / 1100.0)))


def test_tpb_pressure_limits():
    assert tpb_pressure(3e5, 5e4, 0.0, 1000.0, 1e-4, "H2") == pytest.approx(5e4)
    low = tpb_pressure(3e5, 5e4, 2e3, 1000.0, 1e-4, "H2")
    high = tpb_pressure(3e5, 5e4, 2e3, 1000.0, 1e-4, "H2O", product=True)
    assert low < 5e4 < high
    with pytest.raises(EvaluationError, match="H2"):
        tpb_pressure(3e5, 5e4, 1e6, 1000.0, 1e-2, "H2")


def test_fuel_equivalent_current_of_pure_hydrogen():
    X = _X(H2=1.0)
    assert fuel_equivalent_current(1e-3, X, SP) == pytest.approx(2 * FARADAY * 1e-3 / SP.M[SP.index["H2"]])
    Xm = _X(CH4=1.0)
    assert fuel_equivalent_current(1e-3, Xm, SP) == pytest.approx(8 * FARADAY * 1e-3 / SP.M[SP.index["CH4"]])
