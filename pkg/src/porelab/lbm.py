"""D2Q9 BGK lattice-Boltzmann solver on a torus with body forcing.

Collision uses a single relaxation time, the body force enters through the
Guo scheme (forcing term plus half-force velocity shift), solids are handled
by full-way bounce-back, and streaming is periodic in both directions. All
quantities are in lattice units; the kinematic viscosity is
``nu = (tau - 1/2) / 3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DataError, ParameterError
from .geometry import StructureGrid, percolates

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


# Lattice vectors (x component, y component) and weights.
EX = np.array([0, 1, 0, -1, 0, 1, -1, -1, 1], dtype=np.int64)
EY = np.array([0, 0, 1, 0, -1, 1, 1, -1, -1], dtype=np.int64)
EX_F = EX.astype(np.float64)
EY_F = EY.astype(np.float64)
WEIGHTS = np.array([4 / 9] + [1 / 9] * 4 + [1 / 36] * 4)
OPPOSITE = np.array([0, 3, 4, 1, 2, 7, 8, 5, 6])

WARM_SPEED_LIMIT = 0.2  # lattice units; predictions are clamped to this speed


@dataclass
class LbmParams:
    """Solver parameters: relaxation time, body force and stopping rule."""

    tau: float = 1.0
    gravity: tuple[float, float] = (1e-6, 0.0)
    rho0: float = 1.0
    tol: float = 1e-8
    check_interval: int = 100
    max_iters: int = 10**6

    def __post_init__(self):
        if self.tau <= 0.5:
            raise ParameterError("relaxation time must exceed 0.5")
        if self.rho0 <= 0:
            raise ParameterError("reference density must be positive")
        if self.tol <= 0:
            raise ParameterError("convergence tolerance must be positive")
        if self.check_interval < 1 or self.max_iters < 1:
            raise ParameterError("check interval and max iterations must be >= 1")
        if self.check_interval % 2:
            # staggered (checkerboard) lattice modes alternate sign every
            # step; an odd interval would let them dominate the residual
            raise ParameterError("check interval must be even")

    @property
    def viscosity(self) -> float:
        return (self.tau - 0.5) / 3.0

    @property
    def force_axis(self) -> str:
        gx, gy = self.gravity
        return "x" if abs(gx) >= abs(gy) else "y"


@dataclass
class VelocityField:
    """Two-component velocity field in lattice units, zero on solid nodes."""

    ux: np.ndarray
    uy: np.ndarray

    def __post_init__(self):
        self.ux = np.asarray(self.ux, dtype=np.float64)
        self.uy = np.asarray(self.uy, dtype=np.float64)
        if self.ux.shape != self.uy.shape or self.ux.ndim != 2:
            raise ParameterError("velocity components must share a square 2-D shape")
        if self.ux.shape[0] != self.ux.shape[1]:
            raise ParameterError("velocity field must be square")

    @classmethod
    def zeros(cls, size: int) -> "VelocityField":
        return cls(np.zeros((size, size)), np.zeros((size, size)))

    @property
    def size(self) -> int:
        return self.ux.shape[0]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.ux, self.uy)

    def copy(self) -> "VelocityField":
        return VelocityField(self.ux.copy(), self.uy.copy())


@dataclass
class LbmState:
    """Evolving solver state: distributions stacked as (9, L, L)."""

    grid: StructureGrid
    distributions: np.ndarray
    params: LbmParams
    iteration: int = 0
    _solid: np.ndarray = field(init=False, repr=False)
    _post: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._solid = self.grid.solid_mask.copy()
        self._post = np.empty_like(self.distributions)


def equilibrium(rho, u) -> np.ndarray:
    """Second-order D2Q9 equilibrium; ``u`` is an (ux, uy) pair.

    Scalars give the 9-vector of one node; (L, L) arrays give a (9, L, L)
    stack.
    """
    rho = np.asarray(rho, dtype=np.float64)
    ux = np.asarray(u[0], dtype=np.float64)
    uy = np.asarray(u[1], dtype=np.float64)
    eu = EX[:, np.newaxis, np.newaxis] * ux + EY[:, np.newaxis, np.newaxis] * uy \
        if ux.ndim == 2 else EX * ux + EY * uy
    usq = ux * ux + uy * uy
    w = WEIGHTS[:, np.newaxis, np.newaxis] if ux.ndim == 2 else WEIGHTS
    return w * rho * (1.0 + 3.0 * eu + 4.5 * eu * eu - 1.5 * usq)


def _guo_forcing(ux: np.ndarray, uy: np.ndarray, params: LbmParams) -> np.ndarray:
    """Guo forcing term per direction for force density ``params.gravity``."""
    gx, gy = params.gravity
    prefactor = WEIGHTS * (1.0 - 0.5 / params.tau)
    ex = EX[:, np.newaxis, np.newaxis]
    ey = EY[:, np.newaxis, np.newaxis]
    eu = ex * ux + ey * uy
    eg = ex * gx + ey * gy
    ug = ux * gx + uy * gy
    return prefactor[:, np.newaxis, np.newaxis] * (3.0 * (eg - ug) + 9.0 * eu * eg)


def init_cold(grid: StructureGrid, params: LbmParams) -> LbmState:
    """Start from rest: equilibrium at (rho0, 0) on every node."""
    if not percolates(grid, params.force_axis):
        raise DataError("structure does not percolate along the force axis")
    size = grid.size
    f = np.broadcast_to(
        (params.rho0 * WEIGHTS)[:, np.newaxis, np.newaxis], (9, size, size)
    ).copy()
    return LbmState(grid=grid, distributions=f, params=params)


def clamp_speed(fld: VelocityField, limit: float = WARM_SPEED_LIMIT) -> VelocityField:
    """Rescale vectors whose magnitude exceeds ``limit``."""
    speed = fld.magnitude()
    scale = np.ones_like(speed)
    over = speed > limit
    scale[over] = limit / speed[over]
    return VelocityField(fld.ux * scale, fld.uy * scale)


def remove_checkerboard(ux: np.ndarray, uy: np.ndarray, pore: np.ndarray) -> None:
    """Project the pore-space checkerboard momentum patterns out, in place.

    Alternating-sign velocity components at the lattice Nyquist feed
    staggered invariants of the collide-stream update: they are conserved
    exactly and oscillate with period two forever, so any amount deposited
    at initialization never decays. Predictions are sanitized by removing
    their projection onto the three alternating patterns over pore pixels.
    """
    size = ux.shape[0]
    alt = (-1.0) ** np.arange(size, dtype=np.float64)
    ones = np.ones(size)
    n_pore = int(np.count_nonzero(pore))
    if n_pore == 0:
        return
    for pattern in (
        np.outer(ones, alt),
        np.outer(alt, ones),
        np.outer(alt, alt),
    ):
        for u in (ux, uy):
            coeff = float((u * pattern)[pore].sum()) / n_pore
            u[pore] -= coeff * pattern[pore]


def init_warm(grid: StructureGrid, fld: VelocityField, params: LbmParams) -> LbmState:
    """Start from equilibrium around a prescribed velocity field.

    Pore nodes take equilibrium at (rho0, u) with the prediction sanitized
    (checkerboard projection removed, speed clamped to WARM_SPEED_LIMIT);
    solid nodes start at rest, matching the cold state.
    """
    if fld.size != grid.size:
        raise ParameterError("velocity field size does not match the grid")
    if not (np.all(np.isfinite(fld.ux)) and np.all(np.isfinite(fld.uy))):
        raise DataError("warm-start field contains non-finite values")
    solid = grid.solid_mask
    ux = np.where(solid, 0.0, fld.ux)
    uy = np.where(solid, 0.0, fld.uy)
    remove_checkerboard(ux, uy, grid.pore_mask)
    clamped = clamp_speed(VelocityField(ux, uy))
    rho = np.full((grid.size, grid.size), params.rho0)
    f = equilibrium(rho, (clamped.ux, clamped.uy))
    return LbmState(grid=grid, distributions=f, params=params)


@njit(cache=True)
def _collide_stream(f, out, solid, tau, gx, gy, w, ex_f, ey_f, ex, ey, opposite):
    """Fused collide-force-stream pass with half-way link bounce-back.

    Populations leaving a fluid node toward a solid neighbour are reflected
    back onto the same node with reversed direction inside the step; solid
    nodes are inert. Returns False if a density went non-finite.
    """
    size = f.shape[1]
    omega = 1.0 / tau
    keep = 1.0 - omega
    force_scale = 1.0 - 0.5 * omega
    hx = 0.5 * gx
    hy = 0.5 * gy
    ok = True
    for y in range(size):
        for x in range(size):
            if solid[y, x]:
                for i in range(9):
                    out[i, y, x] = f[i, y, x]
                continue
            rho = (
                f[0, y, x] + f[1, y, x] + f[2, y, x] + f[3, y, x] + f[4, y, x]
                + f[5, y, x] + f[6, y, x] + f[7, y, x] + f[8, y, x]
            )
            if not np.isfinite(rho):
                ok = False
            inv_rho = 1.0 / rho
            ux = (f[1, y, x] - f[3, y, x] + f[5, y, x] - f[6, y, x]
                  - f[7, y, x] + f[8, y, x] + hx) * inv_rho
            uy = (f[2, y, x] - f[4, y, x] + f[5, y, x] + f[6, y, x]
                  - f[7, y, x] - f[8, y, x] + hy) * inv_rho
            base = 1.0 - 1.5 * (ux * ux + uy * uy)
            ug = ux * gx + uy * gy
            for i in range(9):
                eu = ex_f[i] * ux + ey_f[i] * uy
                eg = ex_f[i] * gx + ey_f[i] * gy
                feq = (w[i] * rho) * (base + 3.0 * eu + 4.5 * eu * eu)
                forcing = (w[i] * force_scale) * (3.0 * (eg - ug) + 9.0 * eg * eu)
                value = keep * f[i, y, x] + omega * feq + forcing
                yd = (y + ey[i]) % size
                xd = (x + ex[i]) % size
                if solid[yd, xd]:
                    out[opposite[i], y, x] = value
                else:
                    out[i, yd, xd] = value
    return ok


def _step_arrays_numpy(f, post, solid, tau, gx, gy):
    """Vectorized reference for one collide-force-stream cycle.

    Kept as an independent implementation of the same update; the jitted
    kernel is cross-checked against it in the test suite.
    """
    rho = f[0] + f[1] + f[2] + f[3] + f[4] + f[5] + f[6] + f[7] + f[8]
    if not np.all(np.isfinite(rho[~solid])):
        return None
    inv_rho = 1.0 / rho
    ux = (f[1] - f[3] + f[5] - f[6] - f[7] + f[8] + 0.5 * gx) * inv_rho
    uy = (f[2] - f[4] + f[5] + f[6] - f[7] - f[8] + 0.5 * gy) * inv_rho

    omega = 1.0 / tau
    keep = 1.0 - omega
    force_scale = 1.0 - 0.5 * omega
    base = 1.0 - 1.5 * (ux * ux + uy * uy)
    ug = ux * gx + uy * gy
    for i in range(9):
        eu = EX_F[i] * ux + EY_F[i] * uy
        eg = EX_F[i] * gx + EY_F[i] * gy
        feq = (WEIGHTS[i] * rho) * (base + 3.0 * eu + 4.5 * eu * eu)
        forcing = (WEIGHTS[i] * force_scale) * (3.0 * (eg - ug) + 9.0 * eg * eu)
        post[i] = keep * f[i] + omega * feq + forcing

    new = np.empty_like(f)
    for i in range(9):
        shift = (int(EY[i]), int(EX[i]))
        new[i] = np.roll(post[i], shift, axis=(0, 1))
    # half-way bounce-back: populations that would enter a solid return to
    # their fluid node with reversed direction
    for i in range(9):
        if i == 0:
            continue
        neighbour_solid = np.roll(solid, (-int(EY[i]), -int(EX[i])), axis=(0, 1))
        hits_wall = ~solid & neighbour_solid
        new[int(OPPOSITE[i])][hits_wall] = post[i][hits_wall]
    new[:, solid] = f[:, solid]
    f[:] = new
    return f


def step(state: LbmState) -> LbmState:
    """One collide-force-stream cycle with full-way bounce-back on solids."""
    f = state.distributions
    params = state.params
    gx, gy = params.gravity

    if _HAVE_NUMBA:
        out = state._post
        ok = _collide_stream(
            f, out, state._solid, params.tau, gx, gy,
            WEIGHTS, EX_F, EY_F, EX, EY, OPPOSITE,
        )
        if not ok:
            raise ConvergenceError(
                f"non-finite distributions at iteration {state.iteration}",
                iteration=state.iteration,
            )
        state.distributions, state._post = out, f
    else:
        result = _step_arrays_numpy(f, state._post, state._solid, params.tau, gx, gy)
        if result is None:
            raise ConvergenceError(
                f"non-finite distributions at iteration {state.iteration}",
                iteration=state.iteration,
            )
    state.iteration += 1
    return state


def moments(state: LbmState) -> tuple[np.ndarray, VelocityField]:
    """Density and velocity fields, with the half-force shift of the Guo scheme."""
    f = state.distributions
    gx, gy = state.params.gravity
    pore = ~state._solid
    rho = f.sum(axis=0)
    if np.any(rho[pore] <= 0):
        raise ConvergenceError(
            f"non-positive density on a pore node at iteration {state.iteration}",
            iteration=state.iteration,
        )
    mom_x = f[1] - f[3] + f[5] - f[6] - f[7] + f[8]
    mom_y = f[2] - f[4] + f[5] + f[6] - f[7] - f[8]
    ux = np.where(pore, (mom_x + 0.5 * gx) / rho, 0.0)
    uy = np.where(pore, (mom_y + 0.5 * gy) / rho, 0.0)
    return rho, VelocityField(ux, uy)


def run_to_convergence(state: LbmState) -> tuple[VelocityField, int]:
    """Step until the velocity change between checks drops below tolerance.

    The relative L2 change ``|u_new - u_old| / max(|u_new|, 1e-30)`` is
    evaluated every ``check_interval`` iterations. Raises
    :class:`ConvergenceError` (carrying the partial field) once
    ``max_iters`` is exhausted.
    """
    params = state.params
    _, previous = moments(state)
    while state.iteration < params.max_iters:
        todo = min(params.check_interval, params.max_iters - state.iteration)
        for _ in range(todo):
            step(state)
        _, current = moments(state)
        diff = np.sqrt(
            np.sum((current.ux - previous.ux) ** 2)
            + np.sum((current.uy - previous.uy) ** 2)
        )
        norm = np.sqrt(np.sum(current.ux**2) + np.sum(current.uy**2))
        if diff / max(norm, 1e-30) < params.tol:
            return current, state.iteration
        previous = current
    raise ConvergenceError(
        f"no convergence within {params.max_iters} iterations",
        iteration=state.iteration,
        partial_field=current,
    )
