"""Conditional quantile bands for predicted velocities.

Residuals r = |v|_ref - |v|_pred are collected per pore pixel, binned into
equal-count bins of the predicted magnitude, and the per-bin empirical
quantiles are joined into continuous curves with a shape-preserving monotone
cubic Hermite interpolant. The band around a prediction x is then
(x + s_lo(x), x + s_hi(x)). The same machinery applies to the individual
velocity components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError
from .geometry import StructureGrid
from .lbm import VelocityField

DEFAULT_LEVELS = (0.05, 0.95)
DEFAULT_BINS = 20
MIN_BIN_COUNT = 20


class MonotoneCubicInterpolant:
    """Piecewise cubic Hermite interpolant with Fritsch-Carlson slopes.

    C1, interpolates the nodes, preserves local monotonicity, never
    overshoots adjacent node values, and extrapolates as a constant beyond
    the node range.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.ndim != 1 or x.size < 2 or x.shape != y.shape:
            raise ParameterError("need at least two (x, y) nodes")
        if np.any(np.diff(x) <= 0):
            raise ParameterError("node abscissae must be strictly increasing")
        self.x = x
        self.y = y
        self.slopes = self._fritsch_carlson_slopes(x, y)

    @staticmethod
    def _fritsch_carlson_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        h = np.diff(x)
        delta = np.diff(y) / h
        n = x.size
        m = np.zeros(n)
        if n == 2:
            m[:] = delta[0]
            return m
        # interior: weighted harmonic mean when secants share a sign
        for k in range(1, n - 1):
            if delta[k - 1] * delta[k] > 0:
                w1 = 2 * h[k] + h[k - 1]
                w2 = h[k] + 2 * h[k - 1]
                m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k])
        m[0] = MonotoneCubicInterpolant._edge_slope(h[0], h[1], delta[0], delta[1])
        m[-1] = MonotoneCubicInterpolant._edge_slope(h[-1], h[-2], delta[-1], delta[-2])
        return m

    @staticmethod
    def _edge_slope(h0: float, h1: float, d0: float, d1: float) -> float:
        # one-sided three-point estimate, clamped to keep shape
        m = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        if np.sign(m) != np.sign(d0):
            return 0.0
        if np.sign(d0) != np.sign(d1) and abs(m) > 3 * abs(d0):
            return 3 * d0
        return m

    def __call__(self, query) -> np.ndarray:
        query = np.asarray(query, dtype=np.float64)
        scalar = query.ndim == 0
        q = np.clip(np.atleast_1d(query), self.x[0], self.x[-1])
        idx = np.clip(np.searchsorted(self.x, q, side="right") - 1, 0, self.x.size - 2)
        h = self.x[idx + 1] - self.x[idx]
        t = (q - self.x[idx]) / h
        t2 = t * t
        t3 = t2 * t
        out = (
            (2 * t3 - 3 * t2 + 1) * self.y[idx]
            + (t3 - 2 * t2 + t) * h * self.slopes[idx]
            + (-2 * t3 + 3 * t2) * self.y[idx + 1]
            + (t3 - t2) * h * self.slopes[idx + 1]
        )
        return float(out[0]) if scalar else out


def pchip_fit(x, y) -> MonotoneCubicInterpolant:
    return MonotoneCubicInterpolant(x, y)


def residuals(pred: VelocityField, ref: VelocityField, grid: StructureGrid,
              component: str = "magnitude") -> tuple[np.ndarray, np.ndarray]:
    """Per-pore-pixel pairs (predicted value, reference - predicted)."""
    if pred.size != ref.size or pred.size != grid.size:
        raise ParameterError("input sizes differ")
    pore = grid.pore_mask
    if component == "magnitude":
        p = pred.magnitude()[pore]
        r = ref.magnitude()[pore]
    elif component == "x":
        p = pred.ux[pore]
        r = ref.ux[pore]
    elif component == "y":
        p = pred.uy[pore]
        r = ref.uy[pore]
    else:
        raise ParameterError("component must be 'magnitude', 'x' or 'y'")
    return p, r - p


def equal_count_groups(n: int, n_bins: int) -> list[np.ndarray]:
    """Index groups of the sorted sample; populations differ by at most one."""
    return np.array_split(np.arange(n), n_bins)


def binned_quantiles(x, r, n_bins: int = DEFAULT_BINS,
                     levels: tuple[float, float] = DEFAULT_LEVELS,
                     min_count: int = MIN_BIN_COUNT):
    """Equal-count binning of x with per-bin empirical quantiles of r.

    Bins with fewer than ``min_count`` samples are merged into their left
    neighbour (the leading bins accumulate rightward). Returns
    (centers, q_lo, q_hi); centers are the per-bin medians of x.
    """
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if x.shape != r.shape or x.ndim != 1:
        raise ParameterError("x and r must be equally long 1-D arrays")
    if n_bins < 2:
        raise ParameterError("need at least two bins")
    lo_level, hi_level = levels
    if not 0.0 <= lo_level < hi_level <= 1.0:
        raise ParameterError("levels must satisfy 0 <= lo < hi <= 1")

    order = np.argsort(x, kind="stable")
    xs = x[order]
    rs = r[order]
    merged: list[np.ndarray] = []
    pending: list[np.ndarray] = []
    pending_count = 0
    for group in equal_count_groups(x.size, n_bins):
        pending.append(group)
        pending_count += group.size
        if pending_count >= min_count:
            merged.append(np.concatenate(pending))
            pending = []
            pending_count = 0
    if pending_count:
        if not merged:
            raise DataError("too few samples for even one populated bin")
        merged[-1] = np.concatenate([merged[-1]] + pending)

    centers, q_lo, q_hi = [], [], []
    for idx in merged:
        center = float(np.median(xs[idx]))
        if centers and center <= centers[-1]:
            # heavy ties collapsed two bins onto one abscissa: merge them
            prev = merged[len(centers) - 1]
            both = np.concatenate([prev, idx])
            centers[-1] = float(np.median(xs[both]))
            q_lo[-1] = float(np.quantile(rs[both], lo_level))
            q_hi[-1] = float(np.quantile(rs[both], hi_level))
            continue
        centers.append(center)
        q_lo.append(float(np.quantile(rs[idx], lo_level)))
        q_hi.append(float(np.quantile(rs[idx], hi_level)))
    if len(centers) < 2:
        raise DataError("fewer than two usable bins")
    return np.asarray(centers), np.asarray(q_lo), np.asarray(q_hi)


@dataclass
class QuantileBand:
    """Fitted conditional band: nodes plus the two monotone interpolants."""

    centers: np.ndarray
    q_lo: np.ndarray
    q_hi: np.ndarray
    levels: tuple[float, float]
    lower_curve: MonotoneCubicInterpolant
    upper_curve: MonotoneCubicInterpolant

    @classmethod
    def fit(cls, x, r, n_bins: int = DEFAULT_BINS,
            levels: tuple[float, float] = DEFAULT_LEVELS,
            min_count: int = MIN_BIN_COUNT) -> "QuantileBand":
        centers, q_lo, q_hi = binned_quantiles(x, r, n_bins, levels, min_count)
        return cls(
            centers=centers, q_lo=q_lo, q_hi=q_hi, levels=levels,
            lower_curve=pchip_fit(centers, q_lo),
            upper_curve=pchip_fit(centers, q_hi),
        )

    @classmethod
    def from_nodes(cls, centers, q_lo, q_hi,
                   levels: tuple[float, float] = DEFAULT_LEVELS) -> "QuantileBand":
        centers = np.asarray(centers, dtype=np.float64)
        q_lo = np.asarray(q_lo, dtype=np.float64)
        q_hi = np.asarray(q_hi, dtype=np.float64)
        return cls(
            centers=centers, q_lo=q_lo, q_hi=q_hi, levels=levels,
            lower_curve=pchip_fit(centers, q_lo),
            upper_curve=pchip_fit(centers, q_hi),
        )


def band_eval(band: QuantileBand, x) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bounds for the reference value given prediction x."""
    x = np.asarray(x, dtype=np.float64)
    return x + band.lower_curve(x), x + band.upper_curve(x)


def coverage(band: QuantileBand, pred: VelocityField, ref: VelocityField,
             grid: StructureGrid, component: str = "magnitude") -> float:
    """Fraction of pore pixels whose reference value falls inside the band."""
    p, r = residuals(pred, ref, grid, component)
    if p.size == 0:
        raise DataError("empty evaluation set")
    lower, upper = band_eval(band, p)
    actual = p + r
    return float(np.mean((lower <= actual) & (actual <= upper)))


def write_band(band: QuantileBand, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("x,q_lo,q_hi\n")
        for c, lo, hi in zip(band.centers, band.q_lo, band.q_hi):
            fh.write(f"{float(c)!r},{float(lo)!r},{float(hi)!r}\n")


def read_band(path, levels: tuple[float, float] = DEFAULT_LEVELS) -> QuantileBand:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if rows.shape[1] != 3:
        raise DataError("band file must have columns x,q_lo,q_hi")
    return QuantileBand.from_nodes(rows[:, 0], rows[:, 1], rows[:, 2], levels)
