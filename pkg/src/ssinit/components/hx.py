"""Counter-flow heat exchanger discretized into modules of finite volumes."""

from __future__ import annotations

from dataclasses import dataclass

from ..eqsys import Equation, Fix, Linear, Model, Role
from ..errors import DomainError
from .base import (INIT, Component, FractionSource, PressureLossParams, add_pressure_state,
                   add_volume, closure_equation, h_nominal, loss_residual)


def heat_transfer_coefficient(gamma_nom: float, w: float, w_nom: float, p: float,
                              p_nom: float) -> float:
    """Convective coefficient scaled from its nominal value by flow and pressure."""
    return gamma_nom * (max(w, 0.0) / w_nom) ** 0.8 * (max(p, 0.0) / p_nom) ** 0.5


@dataclass
class HxSide:
    """Geometry and nominal data of one side, per finite volume."""

    V: float
    S: float
    gamma_nom: float
    w_nom: float
    p_nom: float
    loss: PressureLossParams

    def __post_init__(self):
        if not all(x > 0 for x in (self.V, self.S, self.gamma_nom, self.w_nom, self.p_nom)):
            raise DomainError("heat-exchanger geometry and nominals must be positive")


@dataclass
class HxModule:
    volumes: int = 3
    modules: int = 2
    wall_capacitance: float = 5e3   # J/K per volume

    def __post_init__(self):
        if self.volumes < 1 or self.modules < 1:
            raise DomainError("need at least one volume and one module")
        if not self.wall_capacitance > 0:
            raise DomainError("wall capacitance must be positive")


class HeatExchanger(Component):
    """Hot and cold streams in counter-flow separated by a capacitive wall.

    Each module owns one pressure state per side; a lumped friction loss
    sits at every module outlet.  Hot volume ``j`` (in flow order) faces
    cold volume ``n - 1 - j``.
    """

    kind = "heat_exchanger"
    inlets = ("hot_in", "cold_in")
    outlets = ("hot_out", "cold_out")

    def __init__(self, name, hot: HxSide, cold: HxSide, layout: HxModule | None = None, **kw):
        super().__init__(name, kw.pop("design", None), **kw)
        self.sides = {"hot": hot, "cold": cold}
        self.layout = layout or HxModule()
        self.volumes: dict[str, list] = {}
        self.heat: dict[str, list[str]] = {}

    @property
    def n(self) -> int:
        return self.layout.volumes * self.layout.modules

    def _side(self, m: Model, side: str):
        sp = self.species
        par = self.sides[side]
        lay = self.layout
        i, o = self.port(f"{side}_in"), self.port(f"{side}_out")
        d_in, d_out = self.design[f"{side}_in"], self.design[f"{side}_out"]
        X_des = d_in.fractions(sp)
        n = self.n
        hn = h_nominal(d_in.h(sp))
        # flows between consecutive volumes; the last is the port outlet
        flows = [i.w] + [m.var(f"{self.name}.{side}.w[{j}]", nominal=max(abs(d_in.w), 1e-3),
                                start=d_in.w, unit="kg/s", kind="flow")
                         for j in range(1, n)] + [o.w]
        pressures = []
        for k in range(lay.modules):
            p_des = d_in.p - (d_in.p - d_out.p) * k / lay.modules
            pressures.append(add_pressure_state(m, f"{self.name}.{side}.p[{k}]", p_des))
        m.add_equation(Linear(f"{self.name}.{side}_in.momentum",
                              {i.p: 1.0, pressures[0][0]: -1.0}))
        vols = []
        heat = []
        for j in range(n):
            k = j // lay.volumes
            p, dp = pressures[k]
            T_des = d_in.T + (d_out.T - d_in.T) * (j + 0.5) / n
            if j == 0:
                h_in = lambda v: v[i.h]
                X_in = FractionSource(i.X[:-1])
            else:
                prev = vols[j - 1]
                h_in = lambda v, prev=prev: sp.h(v[prev.T], prev.fractions(v))
                X_in = FractionSource(prev.X)
            Q = m.var(f"{self.name}.{side}[{j}].Q", nominal=max(abs(d_in.w) * hn * 0.01, 1.0),
                      start=0.0, unit="W", kind="power")
            vol = add_volume(m, f"{self.name}.{side}[{j}]", species=sp, V=par.V, p=p, dp=dp,
                             w_in=flows[j], h_in=h_in, X_in=X_in, w_out=flows[j + 1],
                             design_T=T_des, design_X=X_des, Q=Q, nominal_w=d_in.w,
                             nominal_h=hn)
            vols.append(vol)
            heat.append(Q)
            if (j + 1) % lay.volumes == 0:
                down = pressures[k + 1][0] if k + 1 < lay.modules else o.p
                loss = PressureLossParams(par.loss.dp_nom / lay.modules, par.loss.w_nom,
                                          par.loss.rho_nom, par.loss.law)
                m.add_equation(Equation(
                    f"{self.name}.{side}.loss[{k}]",
                    lambda v, loss=loss, w=flows[j + 1], p=p, down=down, vol=vol: loss_residual(
                        v, loss, w, p, down, lambda v: sp.rho(v[p], v[vol.T], vol.fractions(v))),
                    nominal=loss.dp_nom))
        last = vols[-1]
        m.add_equation(Equation(f"{self.name}.{side}_out.h",
                                lambda v: v[o.h] - sp.h(v[last.T], last.fractions(v)), nominal=hn))
        for k in range(self.S - 1):
            m.add_equation(Linear(f"{self.name}.{side}_out.X[{k}]", {o.X[k]: 1.0, last.X[k]: -1.0}))
        m.add_equation(closure_equation(f"{self.name}.{side}_out.closure", o.X))
        self.volumes[side] = vols
        self.heat[side] = heat
        return vols, flows, pressures

    def contribute(self, m: Model):
        hot, hot_w, hot_p = self._side(m, "hot")
        cold, cold_w, cold_p = self._side(m, "cold")
        n = self.n
        lay = self.layout
        self.walls = []
        for j in range(n):
            hv, cv = hot[j], cold[n - 1 - j]
            Tw = m.var(f"{self.name}.wall[{j}].T", nominal=500.0, start=500.0, min=100.0,
                       max=5000.0, unit="K", role=Role.STATE, kind="temperature")
            self.walls.append(Tw)
            dTw = m.var(f"der({Tw})", nominal=5.0, start=0.0, unit="K/s", der_of=Tw,
                        kind="derivative")
            Qh, Qc = self.heat["hot"][j], self.heat["cold"][n - 1 - j]
            m.add_equation(Linear(f"{self.name}.wall[{j}].energy",
                                  {dTw: lay.wall_capacitance, Qh: 1.0, Qc: 1.0},
                                  nominal=m.variables[Qh].nominal))
            m.add_equation(Fix(f"{self.name}.wall[{j}].steady", dTw, 0.0, phase=INIT))
            for side, vol, Q, flows, pressures, k in (
                    ("hot", hv, Qh, hot_w, hot_p, j),
                    ("cold", cv, Qc, cold_w, cold_p, n - 1 - j)):
                par = self.sides[side]
                p = pressures[k // lay.volumes][0]
                w = flows[k + 1]
                m.add_equation(Equation(
                    f"{self.name}.{side}[{k}].convection",
                    lambda v, par=par, p=p, w=w, Q=Q, vol=vol, Tw=Tw: v[Q] - heat_transfer_coefficient(
                        par.gamma_nom, v[w], par.w_nom, v[p], par.p_nom) * par.S * (v[Tw] - v[vol.T]),
                    nominal=m.variables[Q].nominal))
        self._init_wall_starts(m)

    def _init_wall_starts(self, m: Model):
        n = self.n
        for j, Tw in enumerate(self.walls):
            Th = m.variables[self.volumes["hot"][j].T].start
            Tc = m.variables[self.volumes["cold"][n - 1 - j].T].start
            var = m.variables[Tw]
            var.start = 0.5 * (Th + Tc)
            var.nominal = var.start

    def params_dict(self):
        def side(s: HxSide):
            return {"V": s.V, "S": s.S, "gamma_nom": s.gamma_nom, "w_nom": s.w_nom,
                    "p_nom": s.p_nom, "dp_nom": s.loss.dp_nom, "loss_w_nom": s.loss.w_nom,
                    "rho_nom": s.loss.rho_nom, "law": s.loss.law}
        lay = self.layout
        return {"hot": side(self.sides["hot"]), "cold": side(self.sides["cold"]),
                "volumes": lay.volumes, "modules": lay.modules,
                "wall_capacitance": lay.wall_capacitance}

    def enthalpy_flows(self, values) -> tuple[float, float]:
        """(hot-side enthalpy-flow drop, cold-side rise) from a solution dict."""
        hi, ho = self.port("hot_in"), self.port("hot_out")
        ci, co = self.port("cold_in"), self.port("cold_out")
        drop = values[hi.w] * values[hi.h] - values[ho.w] * values[ho.h]
        rise = values[co.w] * values[co.h] - values[ci.w] * values[ci.h]
        return drop, rise
