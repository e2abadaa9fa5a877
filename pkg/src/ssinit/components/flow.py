"""Boundary sources and sinks, pressure losses, homotopy decouplers and turbomachines."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..eqsys import Equation, Fix, Linear, Model, Role, homotopy_combine
from ..errors import DomainError
from ..media import R, closed
from .base import (Component, PortDesign, PressureLossParams, closure_equation, h_nominal,
                   loss_residual, pass_through, reads)


class Source(Component):
    """Prescribed mass flow, temperature and composition; pressure floats.

    The flow setpoint is the variable ``<name>.w_set``; the plant fixes it
    unless a boundary input block drives it.
    """

    inlets = ()
    outlets = ("outlet",)
    kind = "source"

    def __init__(self, name, w: float, T: float, X: dict, p_guess: float = 1e5, **kw):
        design = kw.pop("design", None) or {"outlet": PortDesign(p_guess, w, T, X)}
        super().__init__(name, design, **kw)
        self.w = float(w)
        self.T = float(T)
        self.X = dict(X)
        self.signals = {"w_set": f"{name}.w_set"}

    def contribute(self, m: Model):
        out = self.port("outlet")
        Xs = closed([float(self.X.get(n, 0.0)) for n in self.species.names])
        h = self.species.h(self.T, Xs)
        m.var(self.signals["w_set"], nominal=max(abs(self.w), 1e-3), start=self.w, unit="kg/s",
              kind="flow")
        m.add_equation(Linear(f"{self.name}.flow", {out.w: 1.0, self.signals["w_set"]: -1.0}))
        m.add_equation(Fix(f"{self.name}.enthalpy", out.h, h, nominal=h_nominal(h)))
        for i, name in enumerate(out.X[:-1]):
            m.add_equation(Fix(f"{self.name}.X[{i}]", name, Xs[i]))
        m.add_equation(closure_equation(f"{self.name}.closure", out.X))

    def params_dict(self):
        return {"w": self.w, "T": self.T, "X": self.X}


class Sink(Component):
    """Prescribed pressure."""

    inlets = ("inlet",)
    outlets = ()
    kind = "sink"

    def __init__(self, name, p: float, **kw):
        super().__init__(name, kw.pop("design", None), **kw)
        self.p = float(p)

    def contribute(self, m: Model):
        m.add_equation(Fix(f"{self.name}.pressure", self.port("inlet").p, self.p, nominal=self.p))

    def params_dict(self):
        return {"p": self.p}


class PressureLoss(Component):
    """Lumped friction element between two pressure nodes."""

    kind = "pressure_loss"

    def __init__(self, name, params: PressureLossParams, **kw):
        super().__init__(name, kw.pop("design", None), **kw)
        self.params = params

    def contribute(self, m: Model):
        i, o = self.port("inlet"), self.port("outlet")
        par = self.params
        m.add_equation(Equation(
            f"{self.name}.friction",
            lambda v: loss_residual(v, par, i.w, i.p, o.p, lambda v: self.inflow_rho(v, i)),
            nominal=par.dp_nom))
        m.add_equation(Linear(f"{self.name}.flow", {o.w: 1.0, i.w: -1.0}))
        m.add_equation(Linear(f"{self.name}.enthalpy", {o.h: 1.0, i.h: -1.0}))
        m.add(pass_through(f"{self.name}.X", i.X, o.X))

    def params_dict(self):
        p = self.params
        return {"dp_nom": p.dp_nom, "w_nom": p.w_nom, "rho_nom": p.rho_nom, "law": p.law}


@dataclass
class DecouplerParams:
    h_des: float
    X_des: list

    def __post_init__(self):
        if abs(math.fsum(self.X_des) - 1.0) > 1e-12:
            raise DomainError("design composition must sum to one")


def decoupler_outlet(h_in: float, X_in, params: DecouplerParams, lam: float):
    """Outlet (h, X): design values at lambda=0, inlet values at lambda=1."""
    h = homotopy_combine(h_in, params.h_des, lam)
    X = [homotopy_combine(a, b, lam) for a, b in zip(X_in, params.X_des)]
    return h, X


class Decoupler(Component):
    """Pass-through whose outlet enthalpy and composition start at design values."""

    kind = "decoupler"

    def __init__(self, name, params: DecouplerParams | None = None, **kw):
        super().__init__(name, kw.pop("design", None), **kw)
        if params is None:
            d = self.design["inlet"]
            X = d.fractions(self.species)
            params = DecouplerParams(self.species.h(d.T, X), X)
        self.params = params

    def contribute(self, m: Model):
        i, o = self.port("inlet"), self.port("outlet")
        par = self.params
        m.add_equation(Linear(f"{self.name}.momentum", {o.p: 1.0, i.p: -1.0}))
        m.add_equation(Linear(f"{self.name}.flow", {o.w: 1.0, i.w: -1.0}))
        m.add_equation(Equation(f"{self.name}.enthalpy",
                                lambda v: v[o.h] - v.hom(lambda: v[i.h], par.h_des),
                                nominal=h_nominal(par.h_des)))
        for k in range(self.S - 1):
            m.add_equation(Equation(
                f"{self.name}.X[{k}]",
                lambda v, k=k: v[o.X[k]] - v.hom(lambda: v[i.X[k]], par.X_des[k])))
        m.add_equation(closure_equation(f"{self.name}.closure", o.X))

    def params_dict(self):
        return {"h_des": self.params.h_des, "X_des": list(self.params.X_des)}


# ---------------------------------------------------------------------------
# turbomachinery


@dataclass
class TurbineParams:
    K_t: float
    eta: float
    w_nom: float
    p_nom: float

    def __post_init__(self):
        if not self.K_t > 0:
            raise DomainError("Stodola coefficient must be positive")
        if not 0.0 < self.eta <= 1.0:
            raise DomainError("isentropic efficiency must lie in (0, 1]")
        if not (self.w_nom > 0 and self.p_nom > 0):
            raise DomainError("turbine nominals must be positive")


def stodola_flow(p_in: float, rho_in: float, beta: float, K_t: float) -> float:
    if beta < 1.0:
        raise DomainError(f"pressure ratio {beta} < 1 (reverse flow unsupported)")
    if not (p_in > 0 and rho_in > 0):
        raise DomainError("inlet pressure and density must be positive")
    return K_t * math.sqrt(p_in * rho_in) * math.sqrt(1.0 - 1.0 / (beta * beta))


def turbine_flow(p_in: float, rho_in: float, beta: float, params: TurbineParams, lam: float) -> float:
    """Ellipse-law flow blended with the flow proportional to inlet pressure."""
    simple = params.w_nom / params.p_nom * p_in
    if lam == 0.0:
        if beta < 1.0:
            raise DomainError(f"pressure ratio {beta} < 1 (reverse flow unsupported)")
        return simple
    return homotopy_combine(stodola_flow(p_in, rho_in, beta, params.K_t), simple, lam)


def isentropic_temperature(T_in: float, beta: float, R_mix: float, cp: float) -> float:
    """Ideal-gas isentropic outlet temperature for pressure ratio ``p_out/p_in = 1/beta``."""
    return T_in * beta ** (-R_mix / cp)


class Turbine(Component):
    kind = "turbine"

    def __init__(self, name, params: TurbineParams, **kw):
        super().__init__(name, kw.pop("design", None), **kw)
        self.params = params
        self.power = f"{name}.power"

    def outlet_enthalpy(self, h_in, X, p_in, p_out):
        sp = self.species
        T_in = sp.T_from_h(h_in, X)
        beta = p_in / p_out
        if beta < 1.0:
            raise DomainError(f"turbine {self.name}: pressure ratio {beta} < 1")
        T_is = isentropic_temperature(T_in, beta, sp.gas_constant(X), sp.cp_mix(X))
        h_is = sp.h(T_is, X)
        return h_in - self.params.eta * (h_in - h_is)

    def contribute(self, m: Model):
        i, o = self.port("inlet"), self.port("outlet")
        par = self.params
        sp = self.species
        d = self.design["inlet"]
        m.var(self.power, nominal=max(abs(d.w) * 5e5, 1.0), start=abs(d.w) * 5e5, unit="W",
              kind="power")

        def flow(v):
            def full():
                X = reads(v, i.X)
                rho = sp.rho(v[i.p], sp.T_from_h(v[i.h], X), X)
                return stodola_flow(v[i.p], rho, v[i.p] / v[o.p], par.K_t)
            return v[i.w] - v.hom(full, lambda: par.w_nom / par.p_nom * v[i.p])

        m.add_equation(Equation(f"{self.name}.stodola", flow, nominal=par.w_nom))
        m.add_equation(Linear(f"{self.name}.flow", {o.w: 1.0, i.w: -1.0}))
        hn = h_nominal(d.h(sp))
        m.add_equation(Equation(
            f"{self.name}.expansion",
            lambda v: v[o.h] - self.outlet_enthalpy(v[i.h], reads(v, i.X), v[i.p], v[o.p]),
            nominal=hn))
        m.add(pass_through(f"{self.name}.X", i.X, o.X))
        m.add_equation(Equation(f"{self.name}.power_balance",
                                lambda v: v[self.power] - v[i.w] * (v[i.h] - v[o.h]),
                                nominal=max(abs(d.w) * 5e5, 1.0)))

    def params_dict(self):
        p = self.params
        return {"K_t": p.K_t, "eta": p.eta, "w_nom": p.w_nom, "p_nom": p.p_nom}


class Compressor(Component):
    """Fixed pressure ratio and isentropic efficiency."""

    kind = "compressor"

    def __init__(self, name, beta: float, eta: float, **kw):
        super().__init__(name, kw.pop("design", None), **kw)
        if not beta >= 1.0:
            raise DomainError("compressor pressure ratio must be >= 1")
        if not 0.0 < eta <= 1.0:
            raise DomainError("isentropic efficiency must lie in (0, 1]")
        self.beta = float(beta)
        self.eta = float(eta)
        self.power = f"{name}.power"

    def outlet_enthalpy(self, h_in, X):
        sp = self.species
        T_in = sp.T_from_h(h_in, X)
        T_is = isentropic_temperature(T_in, 1.0 / self.beta, sp.gas_constant(X), sp.cp_mix(X))
        return h_in + (sp.h(T_is, X) - h_in) / self.eta

    def contribute(self, m: Model):
        i, o = self.port("inlet"), self.port("outlet")
        d = self.design["inlet"]
        pn = max(abs(d.w) * 2e5, 1.0)
        m.var(self.power, nominal=pn, start=abs(d.w) * 1e5, unit="W", kind="power")
        m.add_equation(Linear(f"{self.name}.ratio", {o.p: 1.0, i.p: -self.beta},
                              nominal=self.design["outlet"].p))
        m.add_equation(Linear(f"{self.name}.flow", {o.w: 1.0, i.w: -1.0}))
        hn = h_nominal(d.h(self.species))
        m.add_equation(Equation(f"{self.name}.compression",
                                lambda v: v[o.h] - self.outlet_enthalpy(v[i.h], reads(v, i.X)),
                                nominal=hn))
        m.add(pass_through(f"{self.name}.X", i.X, o.X))
        m.add_equation(Equation(f"{self.name}.power_balance",
                                lambda v: v[self.power] - v[i.w] * (v[o.h] - v[i.h]), nominal=pn))

    def params_dict(self):
        return {"beta": self.beta, "eta": self.eta}
