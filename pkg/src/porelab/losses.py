"""Five-term physics-informed score for predicted velocity fields.

The total is

    velocity + alpha * obstacle + beta * divergence
             + gamma * periodicity + delta * tortuosity

where the velocity term is the per-component MSE over the domain, the
obstacle term the per-component L1 mean over solid pixels, the divergence
term the mean squared forward-difference divergence over pore pixels
(periodic wrap), the periodicity term the MSE between the prediction for a
translated structure (translated back) and the prediction for the original,
and the tortuosity term the squared gap to a reference tortuosity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .geometry import StructureGrid
from .lbm import VelocityField
from .properties import tortuosity

DEFAULT_TRANSLATION_FRACTION = 0.5  # shift by L/2 along both axes


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 5.0
    beta: float = 1.0
    gamma: float = 0.1
    delta: float = 0.01

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma, self.delta) < 0:
            raise ParameterError("loss weights must be non-negative")


@dataclass(frozen=True)
class LossReport:
    velocity: float
    obstacle: float
    divergence: float
    periodicity: float
    tortuosity: float
    total: float
    weights: LossWeights


def _check_sizes(a: VelocityField, b) -> None:
    if a.size != b.size:
        raise ParameterError("input sizes differ")


def velocity_loss(pred: VelocityField, ref: VelocityField) -> float:
    """Per-component mean squared error over the whole domain."""
    _check_sizes(pred, ref)
    n = pred.size * pred.size
    sq = np.sum((pred.ux - ref.ux) ** 2) + np.sum((pred.uy - ref.uy) ** 2)
    return float(sq / (2 * n))


def obstacle_loss(pred: VelocityField, grid: StructureGrid) -> float:
    """Per-component mean absolute velocity over solid pixels (0 if none)."""
    _check_sizes(pred, grid)
    solid = grid.solid_mask
    n_solid = int(np.count_nonzero(solid))
    if n_solid == 0:
        return 0.0
    total = np.sum(np.abs(pred.ux[solid])) + np.sum(np.abs(pred.uy[solid]))
    return float(total / (2 * n_solid))


def divergence_loss(pred: VelocityField, grid: StructureGrid) -> float:
    """Mean squared discrete divergence over pore pixels.

    Forward first-order differences with periodic wrap; stencils that reach
    into solid neighbours simply use the stored (zero) solid velocities.
    """
    _check_sizes(pred, grid)
    div = (np.roll(pred.ux, -1, axis=1) - pred.ux) + (np.roll(pred.uy, -1, axis=0) - pred.uy)
    pore = grid.pore_mask
    n_pore = int(np.count_nonzero(pore))
    if n_pore == 0:
        raise ParameterError("divergence loss needs at least one pore pixel")
    return float(np.sum(div[pore] ** 2) / n_pore)


def periodicity_loss(pred_original: VelocityField, pred_translated: VelocityField,
                     shift: tuple[int, int]) -> float:
    """MSE between the original prediction and the back-translated prediction
    for the shifted structure."""
    _check_sizes(pred_original, pred_translated)
    size = pred_original.size
    tx, ty = shift
    if not (0 <= tx < size and 0 <= ty < size):
        raise ParameterError("translation must lie in [0, L) per axis")
    back = (-ty, -tx)
    bx = np.roll(pred_translated.ux, back, axis=(0, 1))
    by = np.roll(pred_translated.uy, back, axis=(0, 1))
    n = size * size
    sq = np.sum((pred_original.ux - bx) ** 2) + np.sum((pred_original.uy - by) ** 2)
    return float(sq / (2 * n))


def tortuosity_loss(pred: VelocityField, grid: StructureGrid, tau_ref: float) -> float:
    """Squared gap between predicted and reference tortuosity."""
    return float((tortuosity(pred, grid) - tau_ref) ** 2)


def default_translation(size: int) -> tuple[int, int]:
    t = int(size * DEFAULT_TRANSLATION_FRACTION)
    return t, t


def total_loss(pred_original: VelocityField, pred_translated: VelocityField,
               ref: VelocityField, grid: StructureGrid,
               shift: tuple[int, int] | None = None,
               weights: LossWeights = LossWeights()) -> LossReport:
    """Evaluate all five components and their weighted sum."""
    if shift is None:
        shift = default_translation(grid.size)
    vel = velocity_loss(pred_original, ref)
    obs = obstacle_loss(pred_original, grid)
    div = divergence_loss(pred_original, grid)
    perio = periodicity_loss(pred_original, pred_translated, shift)
    tort = tortuosity_loss(pred_original, grid, tortuosity(ref, grid))
    total = (
        vel + weights.alpha * obs + weights.beta * div
        + weights.gamma * perio + weights.delta * tort
    )
    return LossReport(
        velocity=vel, obstacle=obs, divergence=div, periodicity=perio,
        tortuosity=tort, total=total, weights=weights,
    )
