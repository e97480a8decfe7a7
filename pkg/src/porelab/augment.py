"""Physics-consistent augmentation of (structure, velocity) pairs.

Vertical flips reverse the rows of both arrays and invert the y velocity
component; rolls translate both arrays periodically and leave the component
values untouched. Either way porosity, tortuosity and permeability of the
pair are preserved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .geometry import StructureGrid
from .lbm import VelocityField


@dataclass(frozen=True)
class AugmentPlan:
    """One sampled augmentation: optional flip plus a periodic shift."""

    flip: bool
    shift_x: int
    shift_y: int


def vflip(grid: StructureGrid, field: VelocityField) -> tuple[StructureGrid, VelocityField]:
    """Mirror across the horizontal midline; v_y changes sign."""
    if grid.size != field.size:
        raise ParameterError("grid and field sizes differ")
    flipped = VelocityField(np.flip(field.ux, axis=0), -np.flip(field.uy, axis=0))
    return StructureGrid(np.flip(grid.occupancy, axis=0)), flipped


def roll(grid: StructureGrid, field: VelocityField,
         shift_x: int, shift_y: int) -> tuple[StructureGrid, VelocityField]:
    """Translate both arrays periodically by (shift_x, shift_y) pixels."""
    size = grid.size
    if grid.size != field.size:
        raise ParameterError("grid and field sizes differ")
    if not (0 <= shift_x < size and 0 <= shift_y < size):
        raise ParameterError("shifts must lie in [0, L)")
    shift = (shift_y, shift_x)
    rolled = VelocityField(
        np.roll(field.ux, shift, axis=(0, 1)),
        np.roll(field.uy, shift, axis=(0, 1)),
    )
    return StructureGrid(np.roll(grid.occupancy, shift, axis=(0, 1))), rolled


def sample_augmentation(seed: int, size: int, p_flip: float = 0.5,
                        max_frac: float = 0.3) -> AugmentPlan:
    """Draw a deterministic (flip?, shift_x, shift_y) plan for one instance.

    Shifts are uniform integers in [0, floor(max_frac * L)].
    """
    if not 0.0 <= p_flip <= 1.0:
        raise ParameterError("flip probability must lie in [0, 1]")
    if not 0.0 < max_frac <= 1.0:
        raise ParameterError("max shift fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    flip = bool(rng.uniform() < p_flip)
    bound = int(max_frac * size)
    shift_x = int(rng.integers(0, bound + 1))
    shift_y = int(rng.integers(0, bound + 1))
    return AugmentPlan(flip=flip, shift_x=shift_x, shift_y=shift_y)


def apply_plan(grid: StructureGrid, field: VelocityField,
               plan: AugmentPlan) -> tuple[StructureGrid, VelocityField]:
    if plan.flip:
        grid, field = vflip(grid, field)
    return roll(grid, field, plan.shift_x, plan.shift_y)
