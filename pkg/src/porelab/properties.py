"""Macroscopic transport properties of a velocity field on a structure.

Tortuosity is the ratio of mean speed to mean streamwise velocity over the
pore space; permeability follows Darcy's law for gravity-driven periodic
flow, ``k = mu * <u_x> / (rho0 * g_x)`` with the superficial velocity
averaged over the whole domain. Everything is reported in lattice units
(pixels, pixel^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError
from .geometry import StructureGrid
from .lbm import LbmParams, VelocityField


@dataclass(frozen=True)
class MacroProperties:
    porosity: float
    tortuosity: float
    permeability: float
    mean_speed: float
    max_speed: float

    def as_row(self) -> str:
        return ",".join(
            repr(v) for v in (
                self.porosity, self.tortuosity, self.permeability,
                self.mean_speed, self.max_speed,
            )
        )


def tortuosity(field: VelocityField, grid: StructureGrid) -> float:
    """Mean speed over mean streamwise velocity, averaged on pore pixels."""
    if field.size != grid.size:
        raise ParameterError("field and grid sizes differ")
    pore = grid.pore_mask
    streamwise = float(field.ux[pore].mean())
    if streamwise == 0.0:
        raise DataError("tortuosity undefined: zero mean streamwise velocity")
    speed = float(field.magnitude()[pore].mean())
    return speed / streamwise


def permeability(field: VelocityField, grid: StructureGrid, params: LbmParams) -> float:
    """Darcy permeability in pixel^2 from the domain-averaged flux."""
    if field.size != grid.size:
        raise ParameterError("field and grid sizes differ")
    gx = params.gravity[0]
    if gx == 0.0:
        raise ParameterError("permeability requires a nonzero streamwise force")
    mu = params.rho0 * params.viscosity
    flux = float(field.ux.mean())
    return mu * flux / (params.rho0 * gx)


def summary(field: VelocityField, grid: StructureGrid, params: LbmParams) -> MacroProperties:
    """Bundle porosity, tortuosity, permeability and pore-space speed stats."""
    speed = field.magnitude()[grid.pore_mask]
    return MacroProperties(
        porosity=grid.porosity,
        tortuosity=tortuosity(field, grid),
        permeability=permeability(field, grid, params),
        mean_speed=float(speed.mean()),
        max_speed=float(speed.max()),
    )
