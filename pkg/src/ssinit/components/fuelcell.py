"""Internal-reforming solid oxide fuel cell discretized along the channels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..eqsys import Equation, Fix, Linear, Model, Role
from ..errors import DomainError, EvaluationError
from ..media import (FARADAY, HYDROGEN_OXIDATION, P_REF, STEAM_REFORMING, WATER_GAS_SHIFT, R,
                     ReactionParams, SpeciesTable, equilibrium_constant, reaction_gibbs)
from .base import (INIT, Component, FractionSource, PressureLossParams, add_pressure_state,
                   add_volume, closure_equation, h_nominal, loss_residual)

BAR = 1e5


# ---------------------------------------------------------------------------
# electrochemistry


def open_circuit_potential(T: float, p_H2: float, p_H2O: float, p_O2: float, n: int = 2,
                           species: SpeciesTable | None = None) -> float:
    """Nernst potential of hydrogen oxidation; pressures in Pa."""
    from ..media import DEFAULT_SPECIES

    dg = reaction_gibbs(HYDROGEN_OXIDATION, T, species or DEFAULT_SPECIES)
    if p_H2 <= 0 or p_H2O <= 0 or p_O2 <= 0:
        raise EvaluationError("nonpositive partial pressure in open-circuit potential")
    return -dg / (n * FARADAY) - R * T / (n * FARADAY) * math.log(
        p_H2O / (p_H2 * math.sqrt(p_O2 / P_REF)))


def exchange_current(T_pen: float, k: float, Ea: float, n: int = 2) -> float:
    """Exchange current density (A/m^2) with Arrhenius temperature dependence."""
    return R * T_pen / (n * FARADAY) * k * math.exp(-Ea / (R * T_pen))


def activation_loss(j: float, j0: float, T: float, alpha: float = 0.5, n: int = 2) -> float:
    """Explicit activation overpotential: inverse hyperbolic sine form."""
    return R * T / (alpha * n * FARADAY) * math.asinh(j / (2.0 * j0))


def activation_loss_linear(j: float, j0: float, T_nom: float, alpha: float = 0.5, n: int = 2) -> float:
    """Small-current tangent of :func:`activation_loss` at ``T_nom``."""
    return R * T_nom / (2.0 * alpha * n * FARADAY) * j / j0


def butler_volmer_current(e_act: float, j0: float, T: float, alpha: float = 0.5, n: int = 2) -> float:
    a = n * FARADAY / (R * T)
    return j0 * (math.exp(alpha * a * e_act) - math.exp(-(1.0 - alpha) * a * e_act))


def tpb_pressure(p: float, p_i: float, j: float, T: float, lump: float, name: str,
                 product: bool = False) -> float:
    """Partial pressure at the triple phase boundary.

    ``lump`` is tau / (D_eff * p_electrode); reactant pressures fall and
    product pressures rise with the current density ``j``.
    """
    k = R * T * lump / (4.0 * FARADAY) * j
    p_tpb = p - (p - p_i) * math.exp(-k if product else k)
    if not p_tpb > 0:
        raise EvaluationError(f"nonpositive triple-phase-boundary pressure of {name}: {p_tpb:.4g} Pa",
                              variable=name)
    return p_tpb


def concentration_loss(T: float, channel: dict, tpb: dict) -> float:
    return R * T / (2.0 * FARADAY) * (
        math.log(tpb["H2O"] / channel["H2O"] * channel["H2"] / tpb["H2"])
        + 0.5 * math.log(channel["O2"] / tpb["O2"]))


def reaction_rate(k0: float, Ea: float, T: float, p1: float, p2: float, Kp: float, Keq: float) -> float:
    """Rate per unit area with bar partial pressures."""
    return k0 * math.exp(-Ea / (R * T)) * p1 * p2 * (1.0 - Kp / Keq)


def reaction_rate_from_pressures(reaction: ReactionParams, T: float, pressures: dict,
                                 T_eq: float | None = None) -> float:
    """Same rate law written as forward minus backward term (safe at zero reactant).

    ``pressures`` are in bar; ``T_eq`` overrides the temperature of the
    equilibrium constant.
    """
    fwd = 1.0
    bwd = 1.0
    for name, nu in reaction.stoichiometry.items():
        if nu < 0:
            fwd *= pressures[name] ** (-nu)
        else:
            bwd *= pressures[name] ** nu
    K = equilibrium_constant(reaction, T if T_eq is None else T_eq)
    return reaction.k0 * math.exp(-reaction.Ea / (R * T)) * (fwd - bwd / K)


def partial_pressures(p: float, X, species: SpeciesTable) -> dict:
    y = species.mole_fractions(X)
    return {n: p * yi for n, yi in zip(species.names, y)}


@dataclass
class FuelCellParams:
    """Cell stack data; areas are per volume and per cell."""

    N: int = 5
    cells: float = 100.0
    area: float = 0.01                    # PEN area per volume per cell, m^2
    V_anode: float = 1e-3                 # total anode volume per discretization volume, m^3
    V_cathode: float = 2e-3
    R_ohm: float = 2e-5                   # Ohm m^2
    k_anode: float = 6.54e11
    k_cathode: float = 2.35e11
    Ea_anode: float = 140e3
    Ea_cathode: float = 137e3
    alpha: float = 0.5
    n: int = 2
    diffusion: dict = field(default_factory=lambda: {"H2": 1e-4, "H2O": 1e-4, "O2": 2e-4})
    T_nom: float = 1000.0
    a: float = -2e-5                      # V/A, whole-stack slope of the simplified polarization
    b: float = 0.95                       # V
    design_pressures: dict = field(default_factory=lambda: {"H2": 0.3e5, "H2O": 0.3e5, "O2": 0.4e5})
    gamma_anode: float = 50.0             # W/(m^2 K)
    gamma_cathode: float = 50.0
    pen_capacitance: float = 2e3          # J/K per volume
    utilization: float = 0.7
    anode_loss: PressureLossParams = field(default_factory=lambda: PressureLossParams(2e3, 0.01))
    cathode_loss: PressureLossParams = field(default_factory=lambda: PressureLossParams(3e3, 0.1))
    reforming: ReactionParams = STEAM_REFORMING
    shift: ReactionParams = WATER_GAS_SHIFT

    def __post_init__(self):
        if self.N < 1:
            raise DomainError("fuel cell needs at least one volume")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("charge-transfer coefficient must lie in (0, 1)")
        if self.n < 1:
            raise DomainError("electrons per reaction must be >= 1")
        if not self.a < 0:
            raise DomainError("polarization slope a must be negative")
        if not self.b > 0:
            raise DomainError("polarization intercept b must be positive")
        if not 0.0 < self.utilization < 1.0:
            raise DomainError("fuel utilization must lie in (0, 1)")

    @property
    def total_area(self) -> float:
        return self.area * self.cells

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if isinstance(v, PressureLossParams):
                v = {"dp_nom": v.dp_nom, "w_nom": v.w_nom, "rho_nom": v.rho_nom, "law": v.law}
            elif isinstance(v, ReactionParams):
                v = {"k0": v.k0, "Ea": v.Ea, "dH": v.dH, "dG": v.dG}
            out[k] = v
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FuelCellParams":
        d = dict(d)
        for k in ("anode_loss", "cathode_loss"):
            if k in d and isinstance(d[k], dict):
                d[k] = PressureLossParams(**d[k])
        for k, base in (("reforming", STEAM_REFORMING), ("shift", WATER_GAS_SHIFT)):
            if k in d and isinstance(d[k], dict):
                d[k] = ReactionParams(base.name, base.stoichiometry, reactants=base.reactants, **d[k])
        return cls(**d)


def fuel_equivalent_current(w: float, X, species: SpeciesTable, n: int = 2) -> float:
    """Current (A) released by full oxidation of the H2-equivalent fuel in a stream."""
    idx = species.index
    im = species.inv_M
    mol = lambda s: w * X[idx[s]] * im[idx[s]] if s in idx else 0.0
    return n * FARADAY * (4.0 * mol("CH4") + mol("H2") + mol("CO"))


class FuelCell(Component):
    """Co-flow anode and cathode channels sharing one PEN per volume.

    All volumes share the cell voltage; the total current follows the fuel
    utilization setpoint.  At lambda=0 the polarization is the line
    ``E = a I + b``, temperatures inside the electrochemistry and kinetics
    are ``T_nom`` and the channel partial pressures used by the voltage
    terms are the design constants.
    """

    kind = "fuel_cell"
    inlets = ("anode_in", "cathode_in")
    outlets = ("anode_out", "cathode_out")

    def __init__(self, name, params: FuelCellParams | None = None, **kw):
        super().__init__(name, kw.pop("design", None), **kw)
        self.params = params or FuelCellParams()
        sp = self.species
        for s in ("CH4", "H2", "H2O", "CO", "CO2", "O2"):
            if s not in sp.index:
                raise DomainError(f"fuel cell needs species {s}")
        N = self.params.N
        pre = name
        self.E = f"{pre}.E"
        self.I_total = f"{pre}.I"
        self.power = f"{pre}.power"
        self.I = [f"{pre}.cell[{j}].I" for j in range(N)]
        self.E_ocp = [f"{pre}.cell[{j}].E_ocp" for j in range(N)]
        self.e_ohm = [f"{pre}.cell[{j}].e_ohm" for j in range(N)]
        self.e_conc = [f"{pre}.cell[{j}].e_conc" for j in range(N)]
        self.e_act_a = [f"{pre}.cell[{j}].e_act_anode" for j in range(N)]
        self.e_act_c = [f"{pre}.cell[{j}].e_act_cathode" for j in range(N)]
        self.r_sr = [f"{pre}.cell[{j}].r_reforming" for j in range(N)]
        self.r_wgs = [f"{pre}.cell[{j}].r_shift" for j in range(N)]
        self.T_pen = [f"{pre}.cell[{j}].T_pen" for j in range(N)]
        self.Q_a = [f"{pre}.cell[{j}].Q_anode" for j in range(N)]
        self.Q_c = [f"{pre}.cell[{j}].Q_cathode" for j in range(N)]

    # design helpers --------------------------------------------------------
    def design_current(self) -> float:
        d = self.design["anode_in"]
        return self.params.utilization * fuel_equivalent_current(
            d.w, d.fractions(self.species), self.species, self.params.n)

    def _channel(self, m: Model, side: str, sources_for):
        sp = self.species
        par = self.params
        N = par.N
        i, o = self.port(f"{side}_in"), self.port(f"{side}_out")
        d_in, d_out = self.design[f"{side}_in"], self.design[f"{side}_out"]
        hn = h_nominal(d_in.h(sp))
        X_in_des = d_in.fractions(sp)
        X_out_des = d_out.fractions(sp)
        flows = [i.w] + [m.var(f"{self.name}.{side}.w[{j}]", nominal=max(abs(d_in.w), 1e-4),
                                start=d_in.w + (d_out.w - d_in.w) * j / N, unit="kg/s",
                                kind="flow") for j in range(1, N)] + [o.w]
        p, dp = add_pressure_state(m, f"{self.name}.{side}.p", d_in.p)
        m.add_equation(Linear(f"{self.name}.{side}_in.momentum", {i.p: 1.0, p: -1.0}))
        vols = []
        for j in range(N):
            if j == 0:
                h_in = lambda v: v[i.h]
                X_in = FractionSource(i.X[:-1])
            else:
                prev = vols[j - 1]
                h_in = lambda v, prev=prev: sp.h(v[prev.T], prev.fractions(v))
                X_in = FractionSource(prev.X)
            f = (j + 0.5) / N
            X_des = [a + (b - a) * f for a, b in zip(X_in_des, X_out_des)]
            X_des = X_des[:-1] + [1.0 - math.fsum(X_des[:-1])]
            T_des = d_in.T + (d_out.T - d_in.T) * f
            vol = add_volume(m, f"{self.name}.{side}[{j}]", species=sp,
                             V=par.V_anode if side == "anode" else par.V_cathode, p=p, dp=dp,
                             w_in=flows[j], h_in=h_in, X_in=X_in, w_out=flows[j + 1],
                             design_T=T_des, design_X=X_des, sources=sources_for(j),
                             nominal_w=d_in.w, nominal_h=hn)
            vols.append(vol)
        last = vols[-1]
        loss = par.anode_loss if side == "anode" else par.cathode_loss
        m.add_equation(Equation(
            f"{self.name}.{side}.outlet_loss",
            lambda v: loss_residual(v, loss, o.w, p, o.p,
                                    lambda v: sp.rho(v[p], v[last.T], last.fractions(v))),
            nominal=loss.dp_nom))
        m.add_equation(Equation(f"{self.name}.{side}_out.h",
                                lambda v: v[o.h] - sp.h(v[last.T], last.fractions(v)), nominal=hn))
        for k in range(self.S - 1):
            m.add_equation(Linear(f"{self.name}.{side}_out.X[{k}]", {o.X[k]: 1.0, last.X[k]: -1.0}))
        m.add_equation(closure_equation(f"{self.name}.{side}_out.closure", o.X))
        return vols, p

    def contribute(self, m: Model):
        sp = self.species
        par = self.params
        N = par.N
        idx = sp.index
        M = sp.M
        A = par.total_area
        F = FARADAY
        I_des = self.design_current()
        T_des = 0.5 * (self.design["anode_out"].T + self.design["cathode_out"].T)
        E_des = par.a * I_des + par.b
        h_O2 = sp["O2"].h

        m.var(self.E, nominal=1.0, start=E_des, unit="V", kind="voltage")
        m.var(self.I_total, nominal=max(I_des, 1.0), start=I_des, min=0.0, unit="A", kind="current")
        m.var(self.power, nominal=max(abs(E_des * I_des), 1.0), start=E_des * I_des, unit="W",
              kind="power")
        for j in range(N):
            m.var(self.I[j], nominal=max(I_des / N, 1e-3), start=I_des / N, unit="A", kind="current")
            m.var(self.E_ocp[j], nominal=1.0, start=par.b, unit="V", kind="voltage")
            for name in (self.e_ohm[j], self.e_conc[j], self.e_act_a[j], self.e_act_c[j]):
                m.var(name, nominal=0.1, start=0.02, unit="V", kind="voltage")
            for name in (self.r_sr[j], self.r_wgs[j]):
                m.var(name, nominal=max(I_des / (2 * F * N), 1e-6), start=0.0, unit="mol/s",
                      kind="rate")
            m.var(self.T_pen[j], nominal=T_des, start=T_des, min=200.0, max=3000.0, unit="K",
                  role=Role.STATE, kind="temperature")
            m.var(f"der({self.T_pen[j]})", nominal=1.0, start=0.0, unit="K/s",
                  der_of=self.T_pen[j], kind="derivative")
            for name in (self.Q_a[j], self.Q_c[j]):
                m.var(name, nominal=max(abs(E_des * I_des) / N, 1.0), start=0.0, unit="W",
                      kind="power")

        anode_vols: list = []
        cathode_vols: list = []

        def anode_sources(j):
            def src(v):
                I = v[self.I[j]]
                r1, r2 = v[self.r_sr[j]], v[self.r_wgs[j]]
                n_ox = I / (2.0 * F)
                s = [0.0] * len(sp)
                s[idx["CH4"]] = -r1 * M[idx["CH4"]]
                s[idx["H2O"]] = (-r1 - r2 + n_ox) * M[idx["H2O"]]
                s[idx["CO"]] = (r1 - r2) * M[idx["CO"]]
                s[idx["H2"]] = (3.0 * r1 + r2 - n_ox) * M[idx["H2"]]
                s[idx["CO2"]] = r2 * M[idx["CO2"]]
                m_O2 = I / (4.0 * F) * M[idx["O2"]]
                T_c = v[cathode_vols[j].T]
                power = v[self.Q_a[j]] + h_O2(T_c) * m_O2 - v[self.E] * I
                return s, power
            return src

        def cathode_sources(j):
            def src(v):
                I = v[self.I[j]]
                m_O2 = I / (4.0 * F) * M[idx["O2"]]
                s = [0.0] * len(sp)
                s[idx["O2"]] = -m_O2
                T_c = v[cathode_vols[j].T]
                return s, v[self.Q_c[j]] - h_O2(T_c) * m_O2
            return src

        # cathode first so the anode source closure can read its temperatures
        vols_c, p_c = self._channel(m, "cathode", cathode_sources)
        cathode_vols.extend(vols_c)
        vols_a, p_a = self._channel(m, "anode", anode_sources)
        anode_vols.extend(vols_a)
        self.anode_volumes, self.cathode_volumes = vols_a, vols_c

        pd = par.design_pressures
        T_nom = par.T_nom
        dif = par.diffusion

        def channel(v, j):
            pa = partial_pressures(v[p_a], vols_a[j].fractions(v), sp)
            pc = partial_pressures(v[p_c], vols_c[j].fractions(v), sp)
            return v[p_a], v[p_c], {"H2": pa["H2"], "H2O": pa["H2O"], "O2": pc["O2"]}

        def tpb(pa_tot, pc_tot, ch, jd, T):
            return {"H2": tpb_pressure(pa_tot, ch["H2"], jd, T, dif["H2"], "H2"),
                    "H2O": tpb_pressure(pa_tot, ch["H2O"], jd, T, dif["H2O"], "H2O", product=True),
                    "O2": tpb_pressure(pc_tot, ch["O2"], jd, T, dif["O2"], "O2")}

        p_a_des = self.design["anode_in"].p
        p_c_des = self.design["cathode_in"].p
        a_vol = N * par.a
        for j in range(N):
            Ij, Tp = self.I[j], self.T_pen[j]
            dens = lambda v, Ij=Ij: v[Ij] / A
            m.add_equation(Equation(
                f"{self.name}.cell[{j}].polarization",
                lambda v, j=j, Ij=Ij: v[self.E] - v.hom(
                    lambda: v[self.E_ocp[j]] - v[self.e_ohm[j]] - v[self.e_conc[j]]
                    - v[self.e_act_a[j]] - v[self.e_act_c[j]],
                    lambda: a_vol * v[Ij] + par.b)))

            def ocp(v, j=j, Tp=Tp):
                def full():
                    _, _, ch = channel(v, j)
                    return open_circuit_potential(v[Tp], ch["H2"], ch["H2O"], ch["O2"], par.n, sp)
                return v[self.E_ocp[j]] - v.hom(
                    full, lambda: open_circuit_potential(T_nom, pd["H2"], pd["H2O"], pd["O2"], par.n, sp))
            m.add_equation(Equation(f"{self.name}.cell[{j}].ocp", ocp))
            m.add_equation(Linear(f"{self.name}.cell[{j}].ohmic",
                                  {self.e_ohm[j]: 1.0, Ij: -par.R_ohm / A}, nominal=0.1))

            def conc(v, j=j, Tp=Tp, dens=dens):
                def full():
                    pa, pc, ch = channel(v, j)
                    return concentration_loss(v[Tp], ch, tpb(pa, pc, ch, dens(v), v[Tp]))

                def simple():
                    return concentration_loss(T_nom, pd, tpb(p_a_des, p_c_des, pd, dens(v), T_nom))
                return v[self.e_conc[j]] - v.hom(full, simple)
            m.add_equation(Equation(f"{self.name}.cell[{j}].concentration", conc, nominal=0.1))

            for e_name, k, Ea, label in ((self.e_act_a[j], par.k_anode, par.Ea_anode, "anode"),
                                         (self.e_act_c[j], par.k_cathode, par.Ea_cathode, "cathode")):
                j0_nom = exchange_current(T_nom, k, Ea, par.n)

                def act(v, e_name=e_name, k=k, Ea=Ea, Tp=Tp, dens=dens, j0_nom=j0_nom):
                    def full():
                        T = v[Tp]
                        return activation_loss(dens(v), exchange_current(T, k, Ea, par.n), T,
                                               par.alpha, par.n)
                    return v[e_name] - v.hom(
                        full, lambda: activation_loss_linear(dens(v), j0_nom, T_nom, par.alpha, par.n))
                m.add_equation(Equation(f"{self.name}.cell[{j}].activation_{label}", act, nominal=0.1))

            for r_name, reaction, label in ((self.r_sr[j], par.reforming, "reforming"),
                                            (self.r_wgs[j], par.shift, "shift")):
                def rate(v, r_name=r_name, reaction=reaction, j=j):
                    pp = partial_pressures(v[p_a], vols_a[j].fractions(v), sp)
                    bar = {n: max(x, 0.0) / BAR for n, x in pp.items()}
                    return v[r_name] - A * v.hom(
                        lambda: reaction_rate_from_pressures(reaction, v[vols_a[j].T], bar),
                        lambda: reaction_rate_from_pressures(reaction, T_nom, bar))
                m.add_equation(Equation(f"{self.name}.cell[{j}].{label}", rate,
                                        nominal=m.variables[r_name].nominal))

            S = A
            m.add_equation(Equation(
                f"{self.name}.cell[{j}].convection_anode",
                lambda v, j=j, Tp=Tp: v[self.Q_a[j]] - par.gamma_anode * S * (v[Tp] - v[vols_a[j].T]),
                nominal=m.variables[self.Q_a[j]].nominal))
            m.add_equation(Equation(
                f"{self.name}.cell[{j}].convection_cathode",
                lambda v, j=j, Tp=Tp: v[self.Q_c[j]] - par.gamma_cathode * S * (v[Tp] - v[vols_c[j].T]),
                nominal=m.variables[self.Q_c[j]].nominal))
            dT = f"der({Tp})"
            m.add_equation(Linear(f"{self.name}.cell[{j}].pen_energy",
                                  {dT: par.pen_capacitance, self.Q_a[j]: 1.0, self.Q_c[j]: 1.0},
                                  nominal=m.variables[self.Q_a[j]].nominal))
            m.add_equation(Fix(f"{self.name}.cell[{j}].pen_steady", dT, 0.0, phase=INIT))

        m.add_equation(Linear(f"{self.name}.current_sum",
                              {self.I_total: 1.0, **{I: -1.0 for I in self.I}},
                              nominal=max(I_des, 1.0)))
        ain = self.port("anode_in")
        m.add_equation(Equation(
            f"{self.name}.utilization",
            lambda v: v[self.I_total] - par.utilization * fuel_equivalent_current(
                v[ain.w], [v[x] for x in ain.X], sp, par.n),
            nominal=max(I_des, 1.0)))
        m.add_equation(Equation(f"{self.name}.electric_power",
                                lambda v: v[self.power] - v[self.E] * v[self.I_total],
                                nominal=max(abs(E_des * I_des), 1.0)))

    def params_dict(self):
        return self.params.to_dict()
