"""Component library."""

from .base import (Component, FractionSource, Port, PortDesign, PressureLossParams, add_pressure_state,
                   add_volume, linear_loss, pressure_loss, quadratic_loss)
from .flow import (Compressor, Decoupler, DecouplerParams, PressureLoss, Sink, Source, Turbine,
                   TurbineParams, decoupler_outlet, isentropic_temperature, stodola_flow, turbine_flow)
from .fuelcell import (FuelCell, FuelCellParams, activation_loss, activation_loss_linear,
                       butler_volmer_current, concentration_loss, exchange_current,
                       fuel_equivalent_current, open_circuit_potential, reaction_rate,
                       reaction_rate_from_pressures, tpb_pressure)
from .hx import HeatExchanger, HxModule, HxSide, heat_transfer_coefficient
from .volumes import (ATOMS, Combustor, Condenser, CondenserParams, Intercooler, atom_flows,
                      complete_combustion, condensate_flow, condenser_split, gas_composition)

__all__ = [n for n in dir() if not n.startswith("_")]
