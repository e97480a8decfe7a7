"""Dataset loading, deterministic splitting and physics-consistent
augmentation for training."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .records import Record, read_manifest, read_record


@dataclass
class Sample:
    record_id: int
    solid: np.ndarray  # (L, L) bool
    ux: np.ndarray     # (L, L) float64, reference solution
    uy: np.ndarray


def load_dataset(directory) -> list[Sample]:
    directory = Path(directory)
    samples = []
    for row in read_manifest(directory / "manifest.csv"):
        rec = read_record(directory / row["file"])
        samples.append(Sample(record_id=row["id"], solid=rec.solid,
                              ux=rec.ux, uy=rec.uy))
    return samples


def split_ids(ids, seed: int, fractions=(0.70, 0.15, 0.15)):
    """Same shuffle-and-round partition the dataset pipeline uses."""
    ids = list(ids)
    perm = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in perm]
    n = len(ids)
    first = round(fractions[0] * n)
    second = round((fractions[0] + fractions[1]) * n)
    return shuffled[:first], shuffled[first:second], shuffled[second:]


def augment(solid: np.ndarray, ux: np.ndarray, uy: np.ndarray,
            rng: np.random.Generator, p_flip: float = 0.5,
            max_frac: float = 0.3):
    """Vertical flip (with u_y inversion) plus periodic roll, both random."""
    size = solid.shape[0]
    if rng.uniform() < p_flip:
        solid = np.flip(solid, axis=0)
        ux = np.flip(ux, axis=0)
        uy = -np.flip(uy, axis=0)
    bound = int(max_frac * size)
    shift = (int(rng.integers(0, bound + 1)), int(rng.integers(0, bound + 1)))
    solid = np.roll(solid, shift, axis=(0, 1))
    ux = np.roll(ux, shift, axis=(0, 1))
    uy = np.roll(uy, shift, axis=(0, 1))
    return solid, ux, uy
