"""Pore-scale flow laboratory: structure synthesis, D2Q9 lattice-Boltzmann
flow, transport properties, physics-informed field scoring, warm-start
benchmarks and conditional uncertainty bands."""

from .errors import (
    ConvergenceError,
    DataError,
    FormatError,
    ParameterError,
    PorelabError,
)
from .geometry import StructureGrid, WaveSpec
from .lbm import LbmParams, LbmState, VelocityField

__all__ = [
    "ConvergenceError",
    "DataError",
    "FormatError",
    "LbmParams",
    "LbmState",
    "ParameterError",
    "PorelabError",
    "StructureGrid",
    "VelocityField",
    "WaveSpec",
]

__version__ = "0.1.0"
