"""Distances between circle-valued coordinates and between whole curves.

Circular coordinates are compared after three normalizations: unwrapping so
successive steps stay within half a turn, flipping the direction of travel so
the net change is non-negative, and an optimal constant offset. The curve
distance combines that with an L2 distance between the fitted trend lines.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import _accel
from .errors import InputError
from .persistence.circular import CircularCoordinate
from .series_io import LinearTrend

DEFAULT_GRID = 256


def _unwrap(c):
    out = np.empty_like(c)
    out[0] = c[0]
    for i in range(c.size - 1):
        d = c[i + 1] - out[i]
        v = c[i + 1] + (np.floor(-0.5 - d) + 1.0)
        # guard against rounding pushing the step off (-0.5, 0.5]
        if v - out[i] > 0.5:
            v -= 1.0
        elif v - out[i] <= -0.5:
            v += 1.0
        out[i + 1] = v
    return out


_unwrap_kernel = _accel.select(_accel.njit(_unwrap), _unwrap)


def t_m(c) -> np.ndarray:
    """Shift each value by an integer so successive steps lie in (-0.5, 0.5]."""
    c = np.ascontiguousarray(c, dtype=float)
    if c.size == 0:
        raise InputError("empty coordinate")
    return _unwrap_kernel(c)


def t_i(c) -> np.ndarray:
    """Reflect about the first value when the sequence ends below its start."""
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        raise InputError("empty coordinate")
    if c[-1] >= c[0]:
        return c.copy()
    return c[0] + (c[0] - c)


def l2(u, v) -> float:
    """Root-mean-square difference (L2 normalized by sqrt(length))."""
    return float(np.sqrt(np.mean((np.asarray(u) - np.asarray(v)) ** 2)))


def offset_interval(c, c_tilde):
    lo = float(np.min(c) - np.min(c_tilde))
    hi = float(np.max(c) - np.max(c_tilde))
    return min(lo, hi), max(lo, hi)


def t_l(c, c_tilde, base="l2") -> float:
    """Minimum of ``base(c, c_tilde + a)`` over the admissible offsets ``a``.

    For the L2 base the optimum is the clamped mean difference; any other
    callable is minimized numerically on the same interval.
    """
    c = np.asarray(c, dtype=float)
    c_tilde = np.asarray(c_tilde, dtype=float)
    if c.shape != c_tilde.shape:
        raise InputError("t_l needs equal-length inputs; resample first")
    lo, hi = offset_interval(c, c_tilde)
    if base == "l2":
        a = min(max(float(np.mean(c - c_tilde)), lo), hi)
        return l2(c, c_tilde + a)
    if hi == lo:
        return float(base(c, c_tilde + lo))
    res = minimize_scalar(lambda a: base(c, c_tilde + a), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    return float(min(res.fun, base(c, c_tilde + lo), base(c, c_tilde + hi)))


def resample(values, n_grid: int) -> np.ndarray:
    """Linear interpolation onto ``n_grid`` points of the normalized index [0, 1]."""
    values = np.asarray(values, dtype=float)
    if values.size < 2 or n_grid < 2:
        raise InputError("resample needs at least two input and two output points")
    if n_grid == values.size:
        return values.copy()
    return np.interp(np.linspace(0.0, 1.0, n_grid), np.linspace(0.0, 1.0, values.size), values)


def canonical(c) -> np.ndarray:
    """Unwrapped coordinate anchored at zero."""
    u = t_m(c)
    return u - u[0]


def phi(c, c_tilde, base="l2", n_grid: int = DEFAULT_GRID) -> float:
    """Distance between two circle-valued coordinates, invariant to integer
    shifts, reversal of direction and constant offsets."""
    if isinstance(c, CircularCoordinate):
        c = c.values
    if isinstance(c_tilde, CircularCoordinate):
        c_tilde = c_tilde.values
    u, v = canonical(c), canonical(c_tilde)
    if u.size != v.size:
        u, v = resample(u, n_grid), resample(v, n_grid)
    return t_l(t_i(u), t_i(v), base)


@dataclass
class CurveDescriptor:
    """Per-curve summary: fitted line plus an optional circular coordinate."""

    trend: LinearTrend
    circular: CircularCoordinate | None = None
    n: int = 0
    t_start: float = 0.0
    t_end: float = 1.0
    name: str = ""

    def trend_on_grid(self, n_grid: int) -> np.ndarray:
        s = np.linspace(0.0, 1.0, n_grid)
        return self.trend(self.t_start + s * (self.t_end - self.t_start))


def curve_distance(a: CurveDescriptor, b: CurveDescriptor, w_lin: float = 1.0,
                   w_circ: float = 1.0, missing_penalty: float = 1.0,
                   n_grid: int = DEFAULT_GRID) -> float:
    """sqrt(w_lin * d_trend^2 + w_circ * d_circ^2)."""
    if w_lin < 0 or w_circ < 0 or (w_lin == 0 and w_circ == 0):
        raise InputError("weights must be non-negative and not both zero")
    d_lin = l2(a.trend_on_grid(n_grid), b.trend_on_grid(n_grid))
    if a.circular is not None and b.circular is not None:
        d_circ = phi(a.circular, b.circular, "l2", n_grid)
    elif a.circular is None and b.circular is None:
        d_circ = 0.0
    else:
        d_circ = missing_penalty
    return float(np.sqrt(w_lin * d_lin**2 + w_circ * d_circ**2))


@dataclass(frozen=True)
class DistanceMatrix:
    entries: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise InputError("distance matrix must be square")
        if np.any(np.diag(e) != 0) or np.any(e < 0) or np.any(np.abs(e - e.T) > 1e-12):
            raise InputError("distance matrix needs zero diagonal, non-negative symmetric entries")
        names = tuple(self.names) or tuple(f"curve{i}" for i in range(e.shape[0]))
        if len(names) != e.shape[0]:
            raise InputError("one name per curve required")
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "names", names)

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def distance_matrix(descriptors, w_lin: float = 1.0, w_circ: float = 1.0,
                    missing_penalty: float = 1.0, n_grid: int = DEFAULT_GRID) -> DistanceMatrix:
    M = len(descriptors)
    if M < 2:
        raise InputError(f"need at least two curves, got {M}")
    E = np.zeros((M, M))
    for i in range(M):
        for j in range(i + 1, M):
            E[i, j] = E[j, i] = curve_distance(descriptors[i], descriptors[j], w_lin, w_circ,
                                               missing_penalty, n_grid)
    names = tuple(d.name or f"curve{i}" for i, d in enumerate(descriptors))
    return DistanceMatrix(E, names)
