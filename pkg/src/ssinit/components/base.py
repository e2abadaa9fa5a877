"""Ports, design-point records and the finite-volume builder shared by components.

Port and composition conventions:

* every port carries ``p``, ``w``, ``h`` and one mass fraction per species;
* a component owns one equation per inlet (its pressure or flow relation)
  and ``2 + S`` equations per outlet (flow, enthalpy, ``S - 1`` fractions
  and the closure of the last species);
* volumes store the first ``S - 1`` fractions as states; the last species
  always follows from the closure ``X_S = 1 - sum(X_i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from ..eqsys import DerivativeBalance, Equation, Fix, Linear, Model, Phase, Role, Variable
from ..errors import DomainError
from ..media import DEFAULT_SPECIES, R, SpeciesTable, closed

INIT = Phase.INITIAL
SIM = Phase.SIMULATION


@dataclass
class PortDesign:
    p: float = 1e5
    w: float = 1.0
    T: float = 300.0
    X: dict = field(default_factory=lambda: {"N2": 1.0})

    def fractions(self, species: SpeciesTable) -> list[float]:
        unknown = set(self.X) - set(species.names)
        if unknown:
            raise DomainError(f"unknown species {sorted(unknown)}")
        return closed([float(self.X.get(n, 0.0)) for n in species.names])

    def h(self, species: SpeciesTable) -> float:
        return species.h(self.T, self.fractions(species))

    def to_dict(self):
        return {"p": self.p, "w": self.w, "T": self.T, "X": dict(self.X)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PortDesign":
        return cls(p=float(d["p"]), w=float(d["w"]), T=float(d["T"]), X=dict(d["X"]))


class Port:
    """Variable names of one fluid port."""

    def __init__(self, component: str, name: str, direction: str, species: SpeciesTable):
        if direction not in ("inlet", "outlet"):
            raise DomainError(f"bad port direction {direction}")
        self.component = component
        self.name = name
        self.direction = direction
        base = f"{component}.{name}"
        self.path = base
        self.p = f"{base}.p"
        self.w = f"{base}.w"
        self.h = f"{base}.h"
        self.X = [f"{base}.X[{s}]" for s in species.names]

    def quantities(self) -> list[str]:
        return [self.p, self.w, self.h, *self.X]


def h_nominal(h: float) -> float:
    return max(abs(h), 1e5)


def add_port_variables(m: Model, port: Port, design: PortDesign, species: SpeciesTable):
    X = design.fractions(species)
    h = species.h(design.T, X)
    m.add_variable(Variable(port.p, nominal=design.p, start=design.p, min=1.0, unit="Pa",
                            kind="pressure"))
    m.add_variable(Variable(port.w, nominal=max(abs(design.w), 1e-3), start=design.w,
                            unit="kg/s", kind="flow"))
    m.add_variable(Variable(port.h, nominal=h_nominal(h), start=h, unit="J/kg", kind="enthalpy"))
    for name, x in zip(port.X, X):
        m.add_variable(Variable(name, nominal=1.0, start=x, unit="1", kind="composition"))


def reads(v, names: Sequence[str]) -> list[float]:
    return [v[n] for n in names]


def closure_equation(name: str, X: Sequence[str], phase=Phase.BOTH) -> Linear:
    """Last fraction equals one minus the others."""
    return Linear(name, {x: 1.0 for x in X}, const=-1.0, phase=phase)


def pass_through(prefix: str, src: Sequence[str], dst: Sequence[str]) -> list[Equation]:
    """``dst_i = src_i`` for all but the last species, closure for the last."""
    eqs = [Linear(f"{prefix}[{k}]", {d: 1.0, s: -1.0}) for k, (s, d) in enumerate(zip(src[:-1], dst[:-1]))]
    eqs.append(closure_equation(f"{prefix}.closure", dst))
    return eqs


def quadratic_loss(w: float, rho: float, dp_nom: float, w_nom: float, rho_nom: float) -> float:
    return dp_nom * w * abs(w) / (w_nom * w_nom) * (rho_nom / rho)


def linear_loss(w: float, dp_nom: float, w_nom: float) -> float:
    return dp_nom / w_nom * w


@dataclass
class PressureLossParams:
    dp_nom: float
    w_nom: float
    rho_nom: float = 1.0
    law: str = "quadratic"

    def __post_init__(self):
        if not (self.dp_nom > 0 and self.w_nom > 0 and self.rho_nom > 0):
            raise DomainError("pressure-loss nominals must be positive")
        if self.law not in ("quadratic", "linear"):
            raise DomainError(f"unknown pressure-loss law {self.law}")


def pressure_loss(w: float, rho: float, params: PressureLossParams, lam: float) -> float:
    """Friction pressure drop; quadratic laws blend to the linear one at lambda=0."""
    from ..eqsys import homotopy_combine

    lin = linear_loss(w, params.dp_nom, params.w_nom)
    if params.law == "linear":
        return lin
    if lam == 0.0:
        return lin
    return homotopy_combine(quadratic_loss(w, rho, params.dp_nom, params.w_nom, params.rho_nom), lin, lam)


def loss_residual(v, params: PressureLossParams, w: str, p_up: str, p_down: str,
                  rho_fn: Callable) -> float:
    """``p_up - p_down - dp(w)`` with the homotopy applied inside ``v``."""
    if params.law == "linear":
        dp = linear_loss(v[w], params.dp_nom, params.w_nom)
    else:
        dp = v.hom(lambda: quadratic_loss(v[w], rho_fn(v), params.dp_nom, params.w_nom, params.rho_nom),
                   lambda: linear_loss(v[w], params.dp_nom, params.w_nom))
    return v[p_up] - v[p_down] - dp


class Component:
    """Base class: subclasses declare ports and add their equations in ``contribute``."""

    inlets: tuple[str, ...] = ("inlet",)
    outlets: tuple[str, ...] = ("outlet",)
    kind = "component"

    def __init__(self, name: str, design: Mapping[str, PortDesign] | None = None,
                 species: SpeciesTable = DEFAULT_SPECIES):
        self.name = name
        self.species = species
        self.design = {k: (v if isinstance(v, PortDesign) else PortDesign.from_dict(v))
                       for k, v in (design or {}).items()}
        for p in (*self.inlets, *self.outlets):
            self.design.setdefault(p, PortDesign())
        self.ports = {p: Port(name, p, "inlet", species) for p in self.inlets}
        self.ports.update({p: Port(name, p, "outlet", species) for p in self.outlets})

    @property
    def S(self) -> int:
        return len(self.species)

    def port(self, name: str) -> Port:
        return self.ports[name]

    def add_ports(self, m: Model):
        for name, port in self.ports.items():
            add_port_variables(m, port, self.design[name], self.species)

    def contribute(self, m: Model):
        raise NotImplementedError

    def params_dict(self) -> dict:
        return {}

    # helpers for subclasses
    def inflow_T(self, v, port: Port) -> float:
        return self.species.T_from_h(v[port.h], reads(v, port.X))

    def inflow_rho(self, v, port: Port) -> float:
        X = reads(v, port.X)
        T = self.species.T_from_h(v[port.h], X)
        return self.species.rho(v[port.p], T, X)


# ---------------------------------------------------------------------------
# finite volume


@dataclass
class VolumeNames:
    prefix: str
    T: str | None
    dT: str | None
    X: list[str]            # S - 1 state fractions (or the pass-through source)
    dX: list[str]
    dM: str
    dU: str | None

    def fractions(self, v) -> list[float]:
        X = [v[n] for n in self.X]
        X.append(1.0 - math.fsum(X))
        return X


def add_volume(m: Model, prefix: str, *, species: SpeciesTable, V: float, p: str, dp: str,
               w_in: str, h_in: Callable, X_in: Callable, w_out: str,
               design_T: float, design_X: Sequence[float], Q: str | None = None,
               sources: Callable | None = None, source_reads: Callable | None = None,
               fixed_T: float | None = None, composition_state: bool = True,
               extra_mass_out: Callable | None = None, nominal_w: float = 1.0,
               nominal_h: float = 1e6) -> VolumeNames:
    """Add the balance equations of one lumped volume at pressure ``p``.

    ``p`` and its derivative ``dp`` come from :func:`add_pressure_state`,
    which also adds the steady initial equation for the pressure.

    ``h_in(v)`` and ``X_in(v)`` give the inflow enthalpy and full mass-fraction
    list.  ``sources(v)`` returns ``(mass_sources_per_species, power)`` for
    reacting volumes.  With ``fixed_T`` the energy balance is replaced by a
    fixed temperature and the composition is passed through algebraically
    (no composition storage).  ``extra_mass_out(v)`` is an additional mass
    outflow (e.g. condensate) entering only the total mass balance.
    """
    S = len(species)
    names = species.names
    if fixed_T is not None:
        composition_state = False
    T = None if fixed_T is not None else m.var(
        f"{prefix}.T", nominal=design_T, start=design_T, min=100.0, max=5000.0, unit="K",
        role=Role.STATE, kind="temperature")
    dT = None
    if T is not None:
        dT = m.var(f"der({T})", nominal=design_T / 100.0, start=0.0, unit="K/s", der_of=T,
                   kind="derivative")
    X: list[str] = []
    dX: list[str] = []
    if composition_state:
        for i in range(S - 1):
            xi = m.var(f"{prefix}.X[{names[i]}]", nominal=1.0, start=design_X[i], unit="1",
                       role=Role.STATE, kind="composition")
            X.append(xi)
            dX.append(m.var(f"der({xi})", nominal=0.01, start=0.0, unit="1/s", der_of=xi,
                            kind="derivative"))
    dM = m.var(f"{prefix}.dM", nominal=max(nominal_w, 1e-3) * 0.01, start=0.0, unit="kg/s",
               kind="derivative")
    dU = None
    if T is not None:
        dU = m.var(f"{prefix}.dU", nominal=max(nominal_w, 1e-3) * nominal_h * 0.01, start=0.0,
                   unit="W", kind="derivative")

    def state_X(v):
        if composition_state:
            Xs = [v[n] for n in X]
            Xs.append(1.0 - math.fsum(Xs))
            return Xs
        return X_in(v)

    def temperature(v):
        return fixed_T if T is None else v[T]

    def props(v):
        Xs = state_X(v)
        pv, Tv = v[p], temperature(v)
        sum_n = species.inv_molar_mass(Xs)
        vol = R * Tv * sum_n / pv
        return pv, Tv, Xs, sum_n, vol

    # mass storage: dM = -V rho^2 (dv/dT dT + dv/dp dp + sum dv/dX_i dX_i)
    def c_dp(v):
        pv, Tv, Xs, sum_n, vol = props(v)
        return -V / vol**2 * (-vol / pv)

    terms = [(c_dp, dp)]
    if T is not None:
        def c_dT(v):
            pv, Tv, Xs, sum_n, vol = props(v)
            return -V / vol**2 * (R * sum_n / pv)
        terms.append((c_dT, dT))
    if composition_state:
        inv_M = species.inv_M
        for i in range(S - 1):
            def c_dX(v, i=i):
                pv, Tv, Xs, sum_n, vol = props(v)
                return -V / vol**2 * (R * Tv / pv) * (inv_M[i] - inv_M[-1])
            terms.append((c_dX, dX[i]))
    m.add_equation(DerivativeBalance(f"{prefix}.mass_storage", dM, terms, nominal=max(nominal_w, 1e-3)))

    # total mass balance
    if sources is None and extra_mass_out is None:
        m.add_equation(Linear(f"{prefix}.mass", {dM: 1.0, w_in: -1.0, w_out: 1.0},
                              nominal=max(nominal_w, 1e-3)))
    else:
        def mass(v):
            s = v[dM] - v[w_in] + v[w_out]
            if sources is not None:
                s -= math.fsum(sources(v)[0])
            if extra_mass_out is not None:
                s += extra_mass_out(v)
            return s
        m.add_equation(Equation(f"{prefix}.mass", mass, nominal=max(nominal_w, 1e-3)))

    # energy
    if T is not None:
        def u_of(v):
            pv, Tv, Xs, sum_n, vol = props(v)
            return species.h(Tv, Xs) - R * Tv * sum_n

        def mass_of(v):
            pv, Tv, Xs, sum_n, vol = props(v)
            return V / vol

        def e_dT(v):
            pv, Tv, Xs, sum_n, vol = props(v)
            return mass_of(v) * (species.cp_mix(Xs) - R * sum_n)

        uterms = [(e_dT, dT), (u_of, dM)]
        if composition_state:
            for i in range(S - 1):
                def e_dX(v, i=i):
                    pv, Tv, Xs, sum_n, vol = props(v)
                    hf, cp, im = species.hf, species.cp, species.inv_M
                    du_i = hf[i] + cp[i] * (Tv - 298.15) - R * Tv * im[i]
                    du_S = hf[-1] + cp[-1] * (Tv - 298.15) - R * Tv * im[-1]
                    return mass_of(v) * (du_i - du_S)
                uterms.append((e_dX, dX[i]))
        m.add_equation(DerivativeBalance(f"{prefix}.energy_storage", dU, uterms,
                                         nominal=max(nominal_w, 1e-3) * nominal_h))

        def energy(v):
            Xs = state_X(v)
            h_out = species.h(v[T], Xs)
            s = v[dU] - v[w_in] * h_in(v) + v[w_out] * h_out
            if Q is not None:
                s -= v[Q]
            if sources is not None:
                s -= sources(v)[1]
            return s
        m.add_equation(Equation(f"{prefix}.energy", energy,
                                nominal=max(nominal_w, 1e-3) * nominal_h))
        m.add_equation(Fix(f"{prefix}.steady_T", dT, 0.0, phase=INIT))

    # species
    if composition_state:
        for i in range(S - 1):
            xi = X[i]

            def balance(v, i=i):
                pv, Tv, Xs, sum_n, vol = props(v)
                s = v[w_in] * (X_in(v)[i] - Xs[i])
                if sources is not None:
                    src = sources(v)[0]
                    s += src[i] - Xs[i] * math.fsum(src)
                return s

            def sim_balance(v, i=i, balance=balance):
                pv, Tv, Xs, sum_n, vol = props(v)
                return V / vol * v[dX[i]] - balance(v)

            m.add_equation(Equation(f"{prefix}.species[{names[i]}]", sim_balance, phase=SIM,
                                    nominal=max(nominal_w, 1e-3)))
            m.add_equation(Fix(f"{prefix}.steady_X[{names[i]}]", dX[i], 0.0, phase=INIT))
            if sources is None:
                # explicit X_out = X_in initial equation keeps fractions out of the core
                m.add_equation(_copy_fraction(f"{prefix}.init_X[{names[i]}]", xi, X_in, i))
            else:
                m.add_equation(Equation(f"{prefix}.init_X[{names[i]}]", balance, phase=INIT,
                                        nominal=max(nominal_w, 1e-3)))
    return VolumeNames(prefix, T, dT, X, dX, dM, dU)


def _copy_fraction(name, xi, X_in, i):
    """``X_state = X_in[i]``; Linear when the source is a plain variable."""
    src = getattr(X_in, "names", None)
    if src is not None:
        return Linear(name, {xi: 1.0, src[i]: -1.0}, phase=INIT)
    return Equation(name, lambda v: v[xi] - X_in(v)[i], phase=INIT)


class FractionSource:
    """Callable returning mass fractions read from named variables.

    ``names`` lists the ``S - 1`` independent fractions; the last follows
    from closure.  Exposing the names lets the builder emit linear equations.
    """

    def __init__(self, names: Sequence[str], full: bool = False):
        self.names = list(names)
        self.full = full

    def __call__(self, v):
        X = [v[n] for n in self.names]
        if self.full:
            return X
        X.append(1.0 - math.fsum(X))
        return X


def add_pressure_state(m: Model, name: str, design_p: float) -> tuple[str, str]:
    p = m.var(name, nominal=design_p, start=design_p, min=1.0, unit="Pa", role=Role.STATE,
              kind="pressure")
    dp = m.var(f"der({p})", nominal=design_p * 1e-3, start=0.0, unit="Pa/s", der_of=p,
               kind="derivative")
    m.add_equation(Fix(f"{p}.steady", dp, 0.0, phase=INIT))
    return p, dp
