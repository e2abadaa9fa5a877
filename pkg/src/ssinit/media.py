"""Ideal-gas mixture properties, water saturation pressure and reaction thermochemistry.

Every species has a constant specific heat and a formation enthalpy at
``T_REF``, so enthalpy is linear in temperature and all partial derivatives
are available in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import DomainError

R = 8.314462618  # J/(mol K)
FARADAY = 96485.33212  # C/mol
T_REF = 298.15  # K
P_REF = 1.0e5  # Pa

# ln(p_sat/Pa) as a cubic in T, least-squares fit of the IAPWS-IF97
# saturation line over 290-460 K; highest-order coefficient first.
WATER_PSAT_COEFFS = (
    3.3961168652341923e-07,
    -0.0004954407442879084,
    0.263561030533289,
    -35.47646584609395,
)
WATER_PSAT_RANGE = (290.0, 460.0)
WATER_LATENT_HEAT = 2.406e6  # J/kg near 40 degC


@dataclass(frozen=True)
class SpeciesData:
    name: str
    molar_mass: float  # kg/mol
    cp: float  # J/(kg K)
    h_formation: float  # J/kg at T_REF
    s_reference: float  # J/(kg K) at T_REF, P_REF

    def __post_init__(self):
        if self.molar_mass <= 0:
            raise DomainError(f"species {self.name}: molar mass must be positive")
        if self.cp <= 0:
            raise DomainError(f"species {self.name}: cp must be positive")

    def h(self, T: float) -> float:
        return self.h_formation + self.cp * (T - T_REF)


def _species(name, M, cp_molar, hf_molar, s0_molar):
    return SpeciesData(name, M, cp_molar / M, hf_molar / M, s0_molar / M)


# molar masses built from C=12.011, H=1.008, O=15.999, N=14.007 so reactions conserve mass exactly
DEFAULT_SPECIES_DATA = (
    _species("CH4", 0.016043, 52.0, -74.87e3, 186.25),
    _species("H2", 0.002016, 29.6, 0.0, 130.68),
    _species("H2O", 0.018015, 37.5, -241.826e3, 188.83),
    _species("CO", 0.028010, 31.5, -110.53e3, 197.66),
    _species("CO2", 0.044009, 50.5, -393.52e3, 213.79),
    _species("O2", 0.031998, 33.5, 0.0, 205.15),
    _species("N2", 0.028014, 31.2, 0.0, 191.61),
)


class SpeciesTable:
    """Ordered set of species with vectorised mixture helpers.

    Compositions are mass-fraction sequences in table order.
    """

    def __init__(self, species: Sequence[SpeciesData]):
        self.species = tuple(species)
        if not self.species:
            raise DomainError("species table is empty")
        self.names = tuple(s.name for s in self.species)
        if len(set(self.names)) != len(self.names):
            raise DomainError("duplicate species names")
        self.index = {n: i for i, n in enumerate(self.names)}
        self.M = tuple(s.molar_mass for s in self.species)
        self.cp = tuple(s.cp for s in self.species)
        self.hf = tuple(s.h_formation for s in self.species)
        self.s0 = tuple(s.s_reference for s in self.species)
        self.inv_M = tuple(1.0 / m for m in self.M)

    def __len__(self):
        return len(self.species)

    def __getitem__(self, name: str) -> SpeciesData:
        return self.species[self.index[name]]

    def __eq__(self, other):
        return isinstance(other, SpeciesTable) and self.species == other.species

    def __hash__(self):
        return hash(self.species)

    # serialization -------------------------------------------------------
    def to_list(self) -> list[dict]:
        return [
            {"name": s.name, "molar_mass": s.molar_mass, "cp": s.cp,
             "h_formation": s.h_formation, "s_reference": s.s_reference}
            for s in self.species
        ]

    @classmethod
    def from_list(cls, items: Sequence[Mapping]) -> "SpeciesTable":
        return cls([SpeciesData(**dict(it)) for it in items])

    # mixture helpers -----------------------------------------------------
    def inv_molar_mass(self, X) -> float:
        """Sum X_i / M_i (mol/kg)."""
        s = 0.0
        for x, im in zip(X, self.inv_M):
            s += x * im
        return s

    def gas_constant(self, X) -> float:
        return R * self.inv_molar_mass(X)

    def cp_mix(self, X) -> float:
        s = 0.0
        for x, c in zip(X, self.cp):
            s += x * c
        return s

    def h(self, T: float, X) -> float:
        dT = T - T_REF
        s = 0.0
        for x, hf, c in zip(X, self.hf, self.cp):
            s += x * (hf + c * dT)
        return s

    def T_from_h(self, h: float, X) -> float:
        hf = 0.0
        cp = 0.0
        for x, f, c in zip(X, self.hf, self.cp):
            hf += x * f
            cp += x * c
        return T_REF + (h - hf) / cp

    def rho(self, p: float, T: float, X) -> float:
        return p / (R * T * self.inv_molar_mass(X))

    def mole_fractions(self, X) -> list[float]:
        n = [x * im for x, im in zip(X, self.inv_M)]
        tot = sum(n)
        return [v / tot for v in n]

    def mass_fractions(self, Y) -> list[float]:
        m = [y * M for y, M in zip(Y, self.M)]
        tot = sum(m)
        return closed([v / tot for v in m])

    def partial_pressure(self, name: str, p: float, X) -> float:
        i = self.index[name]
        return p * X[i] * self.inv_M[i] / self.inv_molar_mass(X)


def closed(X: Sequence[float]) -> list[float]:
    """Return X with the last entry replaced so that the sum is one."""
    X = list(X)
    X[-1] = 1.0 - math.fsum(X[:-1])
    return X


DEFAULT_SPECIES = SpeciesTable(DEFAULT_SPECIES_DATA)


@dataclass(frozen=True)
class MixtureState:
    p: float
    T: float
    X: tuple

    def __post_init__(self):
        if not self.p > 0:
            raise DomainError(f"pressure must be positive, got {self.p}")
        if not self.T > 0:
            raise DomainError(f"temperature must be positive, got {self.T}")
        # closure round-off can leave -1e-16 on an absent last species
        if any(x < -1e-12 for x in self.X):
            raise DomainError("mass fractions must be nonnegative")
        if abs(math.fsum(self.X) - 1.0) > 1e-12:
            raise DomainError("mass fractions must sum to one")


@dataclass(frozen=True)
class PropertyRecord:
    rho: float
    h: float
    u: float
    v: float
    dv_dT: float
    dv_dp: float
    dv_dX: tuple
    du_dT: float
    du_dp: float
    du_dX: tuple


def properties(state: MixtureState, species: SpeciesTable = DEFAULT_SPECIES) -> PropertyRecord:
    """Ideal-gas mixture properties and their analytic partial derivatives."""
    p, T, X = state.p, state.T, state.X
    if len(X) != len(species):
        raise DomainError("composition length does not match species table")
    sum_n = species.inv_molar_mass(X)
    v = R * T * sum_n / p
    h = species.h(T, X)
    u = h - R * T * sum_n
    dT = T - T_REF
    return PropertyRecord(
        rho=1.0 / v,
        h=h,
        u=u,
        v=v,
        dv_dT=R * sum_n / p,
        dv_dp=-v / p,
        dv_dX=tuple(R * T * im / p for im in species.inv_M),
        du_dT=species.cp_mix(X) - R * sum_n,
        du_dp=0.0,
        du_dX=tuple(hf + c * dT - R * T * im
                    for hf, c, im in zip(species.hf, species.cp, species.inv_M)),
    )


def horner_eval(coeffs: Sequence[float], T: float) -> float:
    """Evaluate a1*T^3 + a2*T^2 + a3*T + a4 with three multiplications."""
    a1, a2, a3, a4 = coeffs
    return a4 + T * (a3 + T * (a2 + T * a1))


def p_sat(T: float, coeffs: Sequence[float] = WATER_PSAT_COEFFS,
          T_range: tuple[float, float] = WATER_PSAT_RANGE) -> float:
    """Water saturation pressure in Pa from the exponential of a cubic."""
    lo, hi = T_range
    if not lo <= T <= hi:
        raise DomainError(f"temperature {T} K outside saturation fit range [{lo}, {hi}]")
    return math.exp(horner_eval(coeffs, T))


@dataclass(frozen=True)
class ReactionParams:
    """Kinetic and equilibrium data for one gas-phase reaction.

    ``dH`` and ``dG`` are molar standard values at ``T_REF``; ``k0`` is in
    mol/(s m^2 bar^2) for rate laws written with bar partial pressures.
    """

    name: str
    stoichiometry: Mapping[str, float]
    k0: float
    Ea: float
    dH: float
    dG: float
    reactants: tuple = field(default=())

    def __post_init__(self):
        if not self.k0 > 0:
            raise DomainError(f"reaction {self.name}: k0 must be positive")


def equilibrium_constant(reaction: ReactionParams, T: float) -> float:
    """Van 't Hoff integration with a temperature-independent reaction enthalpy."""
    if not T > 0:
        raise DomainError("temperature must be positive")
    K_ref = math.exp(-reaction.dG / (R * T_REF))
    return K_ref * math.exp(-reaction.dH / R * (1.0 / T - 1.0 / T_REF))


STEAM_REFORMING = ReactionParams(
    "steam_reforming", {"CH4": -1, "H2O": -1, "CO": 1, "H2": 3},
    k0=900.0, Ea=80.0e3, dH=214.0e3, dG=142.1e3, reactants=("CH4", "H2O"))
WATER_GAS_SHIFT = ReactionParams(
    "water_gas_shift", {"CO": -1, "H2O": -1, "CO2": 1, "H2": 1},
    k0=2000.0, Ea=60.0e3, dH=-39.5e3, dG=-28.6e3, reactants=("CO", "H2O"))


def reaction_gibbs(stoichiometry: Mapping[str, float], T: float,
                   species: SpeciesTable = DEFAULT_SPECIES) -> float:
    """Standard molar Gibbs energy change at T (J/mol) from the species table."""
    dh = 0.0
    ds = 0.0
    for name, nu in stoichiometry.items():
        s = species[name]
        dh += nu * s.molar_mass * (s.h_formation + s.cp * (T - T_REF))
        ds += nu * s.molar_mass * (s.s_reference + s.cp * math.log(T / T_REF))
    return dh - T * ds


HYDROGEN_OXIDATION = {"H2": -1.0, "O2": -0.5, "H2O": 1.0}
