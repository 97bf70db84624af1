"""Delay embedding, pairwise distances and maxmin landmark selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _accel
from ..errors import InputError


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # m x d
    source_time_index: np.ndarray | None = None  # m, index into the originating series

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        idx = self.source_time_index
        idx = np.arange(pts.shape[0]) if idx is None else np.asarray(idx, dtype=np.int64)
        if idx.shape != (pts.shape[0],):
            raise InputError("one source time index per point required")
        if not np.all(np.isfinite(pts)):
            raise InputError("point coordinates must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "source_time_index", idx)

    def __len__(self):
        return self.points.shape[0]

    def subset(self, rows) -> "PointCloud":
        rows = np.asarray(rows, dtype=np.int64)
        return PointCloud(self.points[rows], self.source_time_index[rows])


def delay_embed(x, r: int = 20, eps: int = 1) -> PointCloud:
    """Point k is ``(x[k], x[k+eps], ..., x[k+r*eps])``."""
    x = np.asarray(x, dtype=float)
    if r < 1 or eps < 1:
        raise InputError(f"delay parameters must be >= 1, got r={r}, eps={eps}")
    n = x.size
    m = n - r * eps
    if m <= 0:
        raise InputError(f"series of length {n} too short for r={r}, eps={eps}")
    idx = np.arange(m)[:, None] + eps * np.arange(r + 1)[None, :]
    return PointCloud(x[idx], np.arange(m))


def _pairwise_numba(X):
    m, d = X.shape
    D = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            s = 0.0
            for k in range(d):
                diff = X[i, k] - X[j, k]
                s += diff * diff
            D[i, j] = np.sqrt(s)
            D[j, i] = D[i, j]
    return D


def _pairwise_numpy(X, chunk=256):
    m = X.shape[0]
    D = np.empty((m, m))
    for lo in range(0, m, chunk):
        diff = X[lo:lo + chunk, None, :] - X[None, :, :]
        D[lo:lo + chunk] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(D, 0.0)
    return D


pairwise_distances = _accel.select(_accel.njit(_pairwise_numba), _pairwise_numpy)


def _maxmin_numba(X, k, start):
    m, d = X.shape
    chosen = np.empty(k, np.int64)
    mind = np.full(m, np.inf)
    cur = start
    for c in range(k):
        chosen[c] = cur
        best, best_i = -1.0, 0
        for i in range(m):
            s = 0.0
            for q in range(d):
                diff = X[i, q] - X[cur, q]
                s += diff * diff
            dist = np.sqrt(s)
            if dist < mind[i]:
                mind[i] = dist
            if mind[i] > best:
                best = mind[i]
                best_i = i
        cur = best_i
    return chosen


def _maxmin_numpy(X, k, start):
    chosen = np.empty(k, np.int64)
    mind = np.full(X.shape[0], np.inf)
    cur = start
    for c in range(k):
        chosen[c] = cur
        diff = X - X[cur]
        np.minimum(mind, np.sqrt(np.einsum("ij,ij->i", diff, diff)), out=mind)
        cur = int(np.argmax(mind))
    return chosen


_maxmin = _accel.select(_accel.njit(_maxmin_numba), _maxmin_numpy)


def maxmin_landmarks(cloud: PointCloud, k: int, seed: int = 0,
                     start: int | None = None) -> PointCloud:
    """Greedy maxmin subsample of ``k`` points.

    The first landmark is drawn from ``seed`` unless ``start`` pins it; ties
    go to the lowest point index.
    """
    if k < 2:
        raise InputError(f"need k >= 2 landmarks, got {k}")
    m = len(cloud)
    if m <= k:
        return cloud
    if start is None:
        start = int(np.random.default_rng(seed).integers(m))
    rows = _maxmin(np.ascontiguousarray(cloud.points), k, start)
    return cloud.subset(np.sort(rows))
