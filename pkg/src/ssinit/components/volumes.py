"""Lumped 0D volumes: intercooler, flash condenser and oxy-combustor."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..eqsys import Equation, Linear, Model
from ..errors import DomainError
from ..media import (WATER_LATENT_HEAT, WATER_PSAT_COEFFS, WATER_PSAT_RANGE, MixtureState,
                     SpeciesTable, closed, p_sat)
from .base import (Component, FractionSource, PressureLossParams, add_pressure_state,
                   add_volume, closure_equation, h_nominal, loss_residual, pass_through, reads)

ATOMS = {
    "CH4": {"C": 1, "H": 4},
    "H2": {"H": 2},
    "H2O": {"H": 2, "O": 1},
    "CO": {"C": 1, "O": 1},
    "CO2": {"C": 1, "O": 2},
    "O2": {"O": 2},
    "N2": {"N": 2},
}


def atom_flows(w: float, X, species: SpeciesTable) -> dict[str, float]:
    """Element molar flows (mol/s) of a stream."""
    out: dict[str, float] = {}
    for name, x, im in zip(species.names, X, species.inv_M):
        for el, k in ATOMS[name].items():
            out[el] = out.get(el, 0.0) + k * w * x * im
    return out


def stored_mass(V: float, p: float, T: float, X, species: SpeciesTable) -> float:
    return V * species.rho(p, T, X)


class _PressureNode(Component):
    """Volume with one pressure, equal-pressure inlets and a lumped outlet loss."""

    def __init__(self, name, V: float, loss: PressureLossParams, **kw):
        super().__init__(name, kw.pop("design", None), **kw)
        if not V > 0:
            raise DomainError("volume must be positive")
        self.V = float(V)
        self.loss = loss
        self.p_state = f"{name}.p"

    def add_node(self, m: Model):
        p, dp = add_pressure_state(m, self.p_state, self.design[self.outlets[0]].p + self.loss.dp_nom)
        for name in self.inlets:
            m.add_equation(Linear(f"{self.name}.{name}.momentum", {self.port(name).p: 1.0, p: -1.0}))
        return p, dp

    def add_outlet_loss(self, m: Model, rho_fn):
        o = self.port(self.outlets[0])
        m.add_equation(Equation(f"{self.name}.outlet_loss",
                                lambda v: loss_residual(v, self.loss, o.w, self.p_state, o.p, rho_fn),
                                nominal=self.loss.dp_nom))

    def params_dict(self):
        l = self.loss
        return {"V": self.V, "dp_nom": l.dp_nom, "w_nom": l.w_nom, "rho_nom": l.rho_nom, "law": l.law}


class Intercooler(_PressureNode):
    """Outlet temperature held fixed; pressure is the only state."""

    kind = "intercooler"

    def __init__(self, name, V, T_out: float, loss, **kw):
        super().__init__(name, V, loss, **kw)
        if not T_out > 0:
            raise DomainError("intercooler outlet temperature must be positive")
        self.T_out = float(T_out)
        self.heat = f"{name}.Q_rejected"

    def contribute(self, m: Model):
        i, o = self.port("inlet"), self.port("outlet")
        sp = self.species
        p, dp = self.add_node(m)
        X_in = FractionSource(i.X[:-1])
        d = self.design["inlet"]
        add_volume(m, self.name, species=sp, V=self.V, p=p, dp=dp, w_in=i.w, h_in=None,
                   X_in=X_in, w_out=o.w, design_T=self.T_out, design_X=d.fractions(sp),
                   fixed_T=self.T_out, nominal_w=d.w)
        self.add_outlet_loss(m, lambda v: sp.rho(v[p], self.T_out, X_in(v)))
        hn = h_nominal(d.h(sp))
        m.add_equation(Equation(f"{self.name}.outlet_T",
                                lambda v: v[o.h] - sp.h(self.T_out, X_in(v)), nominal=hn))
        m.add(pass_through(f"{self.name}.X", i.X, o.X))
        m.var(self.heat, nominal=max(abs(d.w) * 1e5, 1.0), start=0.0, unit="W", kind="power")
        m.add_equation(Equation(f"{self.name}.heat",
                                lambda v: v[self.heat] - (v[i.w] * v[i.h] - v[o.w] * v[o.h]),
                                nominal=max(abs(d.w) * hn, 1.0)))

    def params_dict(self):
        return {**super().params_dict(), "T_out": self.T_out}


@dataclass
class CondenserParams:
    V: float
    T: float
    coeffs: tuple = WATER_PSAT_COEFFS
    T_range: tuple = WATER_PSAT_RANGE
    latent_heat: float = WATER_LATENT_HEAT

    def __post_init__(self):
        if not self.V > 0:
            raise DomainError("condenser volume must be positive")


def condensate_flow(p: float, T: float, w_in: float, X, species: SpeciesTable,
                    coeffs=WATER_PSAT_COEFFS, T_range=WATER_PSAT_RANGE) -> float:
    """Liquid water leaving a flash at (p, T) so that y_H2O * p <= p_sat(T)."""
    iw = species.index["H2O"]
    y_sat = p_sat(T, coeffs, T_range) / p
    n = [w_in * x * im for x, im in zip(X, species.inv_M)]
    n_w = n[iw]
    n_g = math.fsum(n) - n_w
    if y_sat >= 1.0:
        return 0.0
    n_vap = y_sat * n_g / (1.0 - y_sat)
    return max(0.0, (n_w - n_vap) * species.M[iw])


def gas_composition(w_in: float, X, w_liq: float, species: SpeciesTable) -> list[float]:
    iw = species.index["H2O"]
    w_gas = w_in - w_liq
    out = [w_in * x / w_gas for x in X]
    out[iw] = (w_in * X[iw] - w_liq) / w_gas
    return closed(out)


def condenser_split(state: MixtureState, w_in: float, params: CondenserParams, lam: float,
                    species: SpeciesTable | None = None):
    """Return (gas flow out, liquid flow out, gas composition) of the flash.

    The gas-side total mass balance subtracts the liquid flow scaled by
    lambda, so at lambda=0 the gas flow equals the inlet flow.
    """
    from ..media import DEFAULT_SPECIES

    sp = species or DEFAULT_SPECIES
    if "H2O" not in sp.index:
        raise DomainError("condenser needs H2O in the species set")
    w_liq = condensate_flow(state.p, params.T, w_in, state.X, sp, params.coeffs, params.T_range)
    X_out = gas_composition(w_in, state.X, w_liq, sp)
    return w_in - lam * w_liq, w_liq, X_out


class Condenser(_PressureNode):
    """Flash tank at fixed temperature removing liquid water by Raoult's law."""

    kind = "condenser"

    def __init__(self, name, params: CondenserParams, loss, **kw):
        super().__init__(name, params.V, loss, **kw)
        self.params = params
        self.liquid = f"{name}.w_liquid"
        self.heat = f"{name}.Q_rejected"

    def contribute(self, m: Model):
        i, o = self.port("inlet"), self.port("outlet")
        sp = self.species
        par = self.params
        p, dp = self.add_node(m)
        d = self.design["inlet"]
        X_in = FractionSource(i.X[:-1])
        w_liq = self.liquid
        m.var(w_liq, nominal=max(abs(d.w) * 0.02, 1e-4), start=0.0, unit="kg/s", kind="flow")
        # gas leaving the flash; compositions use the actual liquid flow at every lambda
        X_gas = lambda v: gas_composition(v[i.w], X_in(v), v[w_liq], sp)
        add_volume(m, self.name, species=sp, V=self.V, p=p, dp=dp, w_in=i.w, h_in=None,
                   X_in=X_gas, w_out=o.w, design_T=par.T, design_X=d.fractions(sp),
                   fixed_T=par.T, nominal_w=d.w,
                   extra_mass_out=lambda v: v.hom(lambda: v[w_liq], 0.0))
        m.add_equation(Equation(
            f"{self.name}.raoult",
            lambda v: v[w_liq] - condensate_flow(v[p], par.T, v[i.w], X_in(v), sp, par.coeffs,
                                                 par.T_range),
            nominal=max(abs(d.w) * 0.02, 1e-4)))
        self.add_outlet_loss(m, lambda v: sp.rho(v[p], par.T, X_gas(v)))
        hn = h_nominal(d.h(sp))
        m.add_equation(Equation(f"{self.name}.outlet_T",
                                lambda v: v[o.h] - sp.h(par.T, X_gas(v)), nominal=hn))
        for k in range(self.S - 1):
            m.add_equation(Equation(f"{self.name}.X[{k}]",
                                    lambda v, k=k: v[o.X[k]] - X_gas(v)[k]))
        m.add_equation(closure_equation(f"{self.name}.closure", o.X))
        h_liq = sp["H2O"].h(par.T) - par.latent_heat
        m.var(self.heat, nominal=max(abs(d.w) * 1e5, 1.0), start=0.0, unit="W", kind="power")
        m.add_equation(Equation(
            f"{self.name}.heat",
            lambda v: v[self.heat] - (v[i.w] * v[i.h] - v[o.w] * v[o.h] - v[w_liq] * h_liq),
            nominal=max(abs(d.w) * hn, 1.0)))

    def liquid_enthalpy(self) -> float:
        return self.species["H2O"].h(self.params.T) - self.params.latent_heat

    def params_dict(self):
        return {**super().params_dict(), "T": self.params.T, "coeffs": list(self.params.coeffs)}


def complete_combustion(flows, compositions, species: SpeciesTable):
    """Mix the inlet streams and burn all fuel with the available oxygen.

    Returns ``(w_total, X_out)``.  Raises :class:`DomainError` when there is
    not enough oxygen.
    """
    idx = species.index
    n = [0.0] * len(species)
    w_tot = 0.0
    for w, X in zip(flows, compositions):
        w_tot += w
        for k, (x, im) in enumerate(zip(X, species.inv_M)):
            n[k] += w * x * im
    ch4, h2, co = n[idx["CH4"]], n[idx["H2"]], n[idx["CO"]]
    o2_need = 2.0 * ch4 + 0.5 * h2 + 0.5 * co
    if o2_need > n[idx["O2"]] * (1.0 + 1e-12) + 1e-300:
        raise DomainError(f"sub-stoichiometric oxygen: need {o2_need:.6g} mol/s, "
                          f"have {n[idx['O2']]:.6g} mol/s")
    n[idx["CO2"]] += ch4 + co
    n[idx["H2O"]] += 2.0 * ch4 + h2
    n[idx["O2"]] = max(n[idx["O2"]] - o2_need, 0.0)
    n[idx["CH4"]] = n[idx["H2"]] = n[idx["CO"]] = 0.0
    m = [nk * M for nk, M in zip(n, species.M)]
    tot = math.fsum(m)
    return w_tot, [mk / tot for mk in m]


class Combustor(_PressureNode):
    """0D oxy-combustor with complete combustion of the mixed inflows."""

    kind = "combustor"
    inlets = ("fuel", "oxidant")
    outlets = ("outlet",)

    def __init__(self, name, V, loss, **kw):
        super().__init__(name, V, loss, **kw)
        self.w_mix = f"{name}.w_mix"
        self.X_eff = [f"{name}.X_eff[{s}]" for s in self.species.names[:-1]]

    def contribute(self, m: Model):
        sp = self.species
        o = self.port("outlet")
        ins = [self.port(n) for n in self.inlets]
        p, dp = self.add_node(m)
        d = self.design["outlet"]
        X_des = d.fractions(sp)
        m.var(self.w_mix, nominal=max(abs(d.w), 1e-3), start=d.w, unit="kg/s", kind="flow")
        m.add_equation(Linear(f"{self.name}.mixing", {self.w_mix: 1.0, **{q.w: -1.0 for q in ins}}))
        for k, name in enumerate(self.X_eff):
            m.var(name, nominal=1.0, start=X_des[k], unit="1", kind="composition")

        def burnt(v):
            return complete_combustion([v[q.w] for q in ins], [reads(v, q.X) for q in ins], sp)[1]

        for k, name in enumerate(self.X_eff):
            m.add_equation(Equation(f"{self.name}.burn[{k}]", lambda v, k=k, name=name: v[name] - burnt(v)[k]))

        def h_mix(v):
            return math.fsum(v[q.w] * v[q.h] for q in ins) / v[self.w_mix]

        vol = add_volume(m, self.name, species=sp, V=self.V, p=p, dp=dp, w_in=self.w_mix,
                         h_in=h_mix, X_in=FractionSource(self.X_eff), w_out=o.w,
                         design_T=d.T, design_X=X_des, nominal_w=d.w, nominal_h=h_nominal(d.h(sp)))
        self.volume = vol
        self.add_outlet_loss(m, lambda v: sp.rho(v[p], v[vol.T], vol.fractions(v)))
        hn = h_nominal(d.h(sp))
        m.add_equation(Equation(f"{self.name}.outlet_h",
                                lambda v: v[o.h] - sp.h(v[vol.T], vol.fractions(v)), nominal=hn))
        for k, x in enumerate(vol.X):
            m.add_equation(Linear(f"{self.name}.X[{k}]", {o.X[k]: 1.0, x: -1.0}))
        m.add_equation(closure_equation(f"{self.name}.X.closure", o.X))
