"""Loading, synthesizing and detrending multichannel time series."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class TimeSeriesSet:
    """N channels sampled on a shared, strictly increasing time axis."""

    times: np.ndarray
    values: np.ndarray
    channel_names: tuple = ()

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if times.ndim != 1:
            raise InputError("times must be one-dimensional")
        if values.ndim != 2 or values.shape[1] != times.size:
            raise InputError(
                f"values must be N x n with n={times.size}, got shape {values.shape}"
            )
        if times.size < 3:
            raise InputError(f"need at least 3 time points, got {times.size}")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
            raise InputError("times and values must be finite")
        if np.any(np.diff(times) <= 0):
            raise InputError("times must be strictly increasing")
        names = tuple(self.channel_names) or tuple(f"ch{i}" for i in range(values.shape[0]))
        if len(names) != values.shape[0]:
            raise InputError("one channel name per channel required")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_names", names)

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_times(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class LinearTrend:
    slope: float
    intercept: float
    channel_index: int = 0

    def __call__(self, t):
        return self.slope * np.asarray(t, dtype=float) + self.intercept


@dataclass(frozen=True)
class ResidualSet:
    """Per-channel residuals after removing an ordinary least-squares line."""

    times: np.ndarray
    values: np.ndarray
    channel_names: tuple
    trends: list = field(default_factory=list)

    @classmethod
    def identity(cls, ts: TimeSeriesSet) -> "ResidualSet":
        """Wrap raw data as residuals of a zero trend (de-trending skipped)."""
        trends = [LinearTrend(0.0, 0.0, i) for i in range(ts.n_channels)]
        return cls(ts.times, ts.values, ts.channel_names, trends)


def _parse_float(cell, row, col):
    try:
        return float(cell)
    except ValueError:
        raise InputError(f"non-numeric cell {cell!r} at row {row}, column {col}") from None


def load_csv(path, delimiter: str = ",", header: bool | None = None) -> TimeSeriesSet:
    """Read a CSV whose first column is time and the rest are channels.

    ``header=None`` detects a header row by whether its first cell parses as a
    number. Row numbers in error messages are 1-based file lines.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter)]
    # blank lines are tolerated, but keep original line numbers
    numbered = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not numbered:
        raise InputError(f"{path} is empty")

    names = None
    first_line, first = numbered[0]
    if header is None:
        try:
            float(first[0])
            header = False
        except ValueError:
            header = True
    if header:
        names = [c.strip() for c in first[1:]]
        numbered = numbered[1:]
    if not numbered:
        raise InputError(f"{path} has a header but no data rows")

    width = len(numbered[0][1])
    if width < 2:
        raise InputError("need a time column and at least one value column")
    if names is not None and len(names) != width - 1:
        raise InputError(f"header has {len(names) + 1} columns but data rows have {width}")
    data = np.empty((len(numbered), width))
    for k, (line, row) in enumerate(numbered):
        if len(row) != width:
            raise InputError(f"ragged row at line {line}: expected {width} cells, got {len(row)}")
        for j, cell in enumerate(row):
            data[k, j] = _parse_float(cell.strip(), line, j + 1)

    times = data[:, 0]
    bad = np.flatnonzero(np.diff(times) <= 0)
    if bad.size:
        line = numbered[bad[0] + 1][0]
        raise InputError(f"time column not strictly increasing at line {line}")
    return TimeSeriesSet(times, data[:, 1:].T.copy(), tuple(names) if names else ())


def write_csv(ts: TimeSeriesSet, path, delimiter: str = ","):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["time", *ts.channel_names])
        for k in range(ts.n_times):
            w.writerow([repr(float(ts.times[k]))] + [repr(float(v)) for v in ts.values[:, k]])


def synth_fig2(n_points: int = 200, t_max: float = 4 * np.pi, noise_std: float = 0.2,
               seed: int = 0) -> TimeSeriesSet:
    """Three channels ``(e1, -5t + e2, sin(7t) + e3)`` on an equispaced grid.

    Each channel draws its noise from its own stream keyed by
    ``(seed, channel)``.
    """
    if n_points < 3:
        raise InputError(f"n_points must be >= 3, got {n_points}")
    if noise_std < 0:
        raise InputError("noise_std must be non-negative")
    if t_max <= 0:
        raise InputError("t_max must be positive")
    t = np.linspace(0.0, t_max, n_points)
    clean = np.vstack([np.zeros_like(t), -5.0 * t, np.sin(7.0 * t)])
    noise = np.vstack([
        np.random.default_rng([seed, c]).standard_normal(n_points) for c in range(3)
    ])
    return TimeSeriesSet(t, clean + noise_std * noise, ("noise", "linear", "periodic"))


def fit_line(t, y):
    """Slope and intercept of the OLS line of ``y`` on ``t``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    tc = t - t.mean()
    slope = float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))
    return slope, float(y.mean() - slope * t.mean())


def detrend(ts: TimeSeriesSet) -> ResidualSet:
    trends = []
    res = np.empty_like(ts.values)
    for i, y in enumerate(ts.values):
        slope, intercept = fit_line(ts.times, y)
        trend = LinearTrend(slope, intercept, i)
        trends.append(trend)
        res[i] = y - trend(ts.times)
    return ResidualSet(ts.times, res, ts.channel_names, trends)
