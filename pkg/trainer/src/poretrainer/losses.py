"""Differentiable five-term loss over batched velocity predictions.

Shapes: predictions and references are (B, 2, L, L) tensors (channel 0 is
u_x, channel 1 is u_y); ``solid`` is a (B, 1, L, L) float tensor with 1 on
solid pixels. Every component is returned per sample; training uses the
batch mean of the weighted total.
"""

from __future__ import annotations

import torch


def velocity_loss(pred: torch.Tensor, ref: torch.Tensor) -> torch.Tensor:
    n = pred.shape[-1] * pred.shape[-2]
    return ((pred - ref) ** 2).sum(dim=(1, 2, 3)) / (2 * n)


def obstacle_loss(pred: torch.Tensor, solid: torch.Tensor) -> torch.Tensor:
    n_solid = solid.sum(dim=(1, 2, 3))
    total = (pred.abs() * solid).sum(dim=(1, 2, 3))
    return torch.where(n_solid > 0, total / (2 * n_solid.clamp(min=1)),
                       torch.zeros_like(total))


def divergence_loss(pred: torch.Tensor, solid: torch.Tensor) -> torch.Tensor:
    ux = pred[:, 0]
    uy = pred[:, 1]
    div = (torch.roll(ux, -1, dims=2) - ux) + (torch.roll(uy, -1, dims=1) - uy)
    pore = 1.0 - solid[:, 0]
    n_pore = pore.sum(dim=(1, 2)).clamp(min=1)
    return ((div**2) * pore).sum(dim=(1, 2)) / n_pore


def periodicity_loss(pred: torch.Tensor, pred_translated: torch.Tensor,
                     shift: tuple[int, int]) -> torch.Tensor:
    n = pred.shape[-1] * pred.shape[-2]
    back = torch.roll(pred_translated, shifts=(-shift[1], -shift[0]), dims=(2, 3))
    return ((pred - back) ** 2).sum(dim=(1, 2, 3)) / (2 * n)


TORTUOSITY_CAP = 20.0


def tortuosity(field: torch.Tensor, solid: torch.Tensor) -> torch.Tensor:
    pore = 1.0 - solid[:, 0]
    n_pore = pore.sum(dim=(1, 2)).clamp(min=1)
    speed = torch.sqrt(field[:, 0] ** 2 + field[:, 1] ** 2 + 1e-30)
    mean_speed = (speed * pore).sum(dim=(1, 2)) / n_pore
    mean_vx = (field[:, 0] * pore).sum(dim=(1, 2)) / n_pore
    # flows are driven along +x; an untrained net can emit near-zero or
    # negative net flux, so cap the ratio instead of letting it explode
    return mean_speed / mean_vx.clamp(min=mean_speed.detach() / TORTUOSITY_CAP)


def tortuosity_loss(pred: torch.Tensor, ref: torch.Tensor,
                    solid: torch.Tensor) -> torch.Tensor:
    return (tortuosity(pred, solid) - tortuosity(ref, solid).detach()) ** 2


def total_loss(pred, pred_translated, ref, solid, shift, weights) -> dict:
    """All five components plus the weighted total, per sample."""
    alpha, beta, gamma, delta = weights
    vel = velocity_loss(pred, ref)
    obs = obstacle_loss(pred, solid)
    div = divergence_loss(pred, solid)
    if gamma != 0.0 and pred_translated is not None:
        perio = periodicity_loss(pred, pred_translated, shift)
    else:
        perio = torch.zeros_like(vel)
    tort = tortuosity_loss(pred, ref, solid)
    total = vel + alpha * obs + beta * div + gamma * perio + delta * tort
    return {
        "velocity": vel, "obstacle": obs, "divergence": div,
        "periodicity": perio, "tortuosity": tort, "total": total,
    }
