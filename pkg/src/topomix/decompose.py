"""PCA and rank-correlation separation of linear from periodic/noise components."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import InputError
from .series_io import ResidualSet


@dataclass(frozen=True)
class PrincipalComponents:
    scores: np.ndarray  # N' x n
    loadings: np.ndarray  # N x N'
    explained_variance: np.ndarray  # N'
    mean: np.ndarray  # N
    scale: np.ndarray  # N, ones unless standardized
    degenerate: bool = False

    @property
    def n_components(self) -> int:
        return self.scores.shape[0]

    def reconstruct(self) -> np.ndarray:
        """Input rebuilt from the kept components (mean and scale restored)."""
        return (self.loadings @ self.scores) * self.scale[:, None] + self.mean[:, None]


@dataclass(frozen=True)
class SeparatedComponents:
    """Components renumbered so the linear ones come first."""

    times: np.ndarray
    linear: list  # [(original index, scores)]
    rest: list  # [(original index, scores)]
    tau_values: np.ndarray  # indexed by original component index
    explained_variance: np.ndarray
    tau_threshold: float = 0.5
    trends: list = field(default_factory=list)

    @property
    def n_ell(self) -> int:
        return len(self.linear)

    @property
    def n_components(self) -> int:
        return len(self.linear) + len(self.rest)

    @property
    def order(self) -> list:
        return [i for i, _ in self.linear] + [i for i, _ in self.rest]


def pca(res: ResidualSet, n_keep="all", standardize: bool = False,
        variance_fraction: float | None = None) -> PrincipalComponents:
    """Principal components of the channel matrix, largest variance first.

    ``variance_fraction`` keeps the fewest leading components whose cumulative
    explained variance reaches that fraction. Loading signs are fixed so the
    largest-magnitude entry of each loading vector is positive.
    """
    X = np.asarray(res.values, dtype=float)
    N, n = X.shape
    if N < 1:
        raise InputError("need at least one channel")
    if n < N:
        warnings.warn(f"fewer time points ({n}) than channels ({N}); PCA is rank deficient",
                      stacklevel=2)
    mean = X.mean(axis=1)
    Xc = X - mean[:, None]
    scale = np.ones(N)
    if standardize:
        sd = Xc.std(axis=1, ddof=1)
        scale = np.where(sd > 0, sd, 1.0)
        Xc = Xc / scale[:, None]

    U, s, _ = np.linalg.svd(Xc, full_matrices=False)
    var = s**2 / (n - 1)
    tol = max(N, n) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol)) if s.size and s[0] > 0 else 0
    if rank == 0:
        warnings.warn("zero-variance input: no principal components", stacklevel=2)
        return PrincipalComponents(np.zeros((0, n)), np.zeros((N, 0)), np.zeros(0),
                                   mean, scale, degenerate=True)

    keep = rank if n_keep in ("all", None) else min(int(n_keep), rank)
    if variance_fraction is not None:
        cum = np.cumsum(var[:rank]) / var[:rank].sum()
        keep = min(keep, int(np.searchsorted(cum, variance_fraction - 1e-12) + 1))
    L = U[:, :keep].copy()
    flip = np.sign(L[np.argmax(np.abs(L), axis=0), np.arange(keep)])
    L *= flip
    scores = L.T @ Xc
    return PrincipalComponents(scores, L, var[:keep].copy(), mean, scale)


# --- Kendall's tau-b -------------------------------------------------------

def _count_inversions_numba(a):
    """Pairs i < j with a[i] > a[j], by bottom-up merge sort."""
    n = a.shape[0]
    src = a.copy()
    dst = np.empty_like(src)
    inv = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    inv += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
        src, dst = dst, src
        width *= 2
    return inv


def _count_inversions_numpy(a):
    """Same count with vectorized per-level searchsorted (O(n log^2 n))."""
    n = a.size
    if n < 2:
        return 0
    _, r = np.unique(a, return_inverse=True)
    r = r.astype(np.int64)
    K = int(r.max()) + 1
    pos = np.arange(n)
    inv = 0
    width = 1
    while width < n:
        block = pos // (2 * width)
        is_right = (pos // width) % 2 == 1
        # sort values within each half-block so each left half is ordered
        order = np.lexsort((r, pos // width))
        vals, blk, right = r[order], block[order], is_right[order]
        left_keys = blk[~right] * (K + 1) + vals[~right]
        rk = blk[right] * (K + 1) + vals[right]
        end = np.searchsorted(left_keys, blk[right] * (K + 1) + K, side="right")
        below = np.searchsorted(left_keys, rk, side="right")
        inv += int(np.sum(end - below))
        width *= 2
    return inv


count_inversions = _accel.select(_accel.njit(_count_inversions_numba), _count_inversions_numpy)


def _tie_pairs(*cols):
    if len(cols) == 1:
        _, counts = np.unique(cols[0], return_counts=True)
    else:
        _, counts = np.unique(np.column_stack(cols), axis=0, return_counts=True)
    counts = counts.astype(np.int64)
    return int(np.sum(counts * (counts - 1) // 2))


def kendall_tau(t, x, *, full: bool = False):
    """Kendall's tau-b between ``t`` and ``x``.

    Constant input on either side has no defined tau-b; it is reported as 0,
    and ``full=True`` returns ``(tau, degenerate)`` to tell that case apart.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    n = t.size
    if n != x.size:
        raise InputError("t and x must have equal length")
    if n < 2:
        raise InputError("kendall_tau needs at least two observations")
    order = np.lexsort((x, t))
    discordant = int(count_inversions(np.ascontiguousarray(x[order])))
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(t)
    n2 = _tie_pairs(x)
    n3 = _tie_pairs(t, x)
    s = n0 - n1 - n2 + n3 - 2 * discordant
    tau, degenerate = _tau_b(s, n0 - n1, n0 - n2)
    return (tau, degenerate) if full else tau


def _tau_b(s, pairs_untied_t, pairs_untied_x):
    if pairs_untied_t == 0 or pairs_untied_x == 0:
        return 0.0, True
    return s / math.sqrt(float(pairs_untied_t) * float(pairs_untied_x)), False


def classify_linear(pc: PrincipalComponents, times, tau_threshold: float = 0.5,
                    trends=None) -> SeparatedComponents:
    """Split components by |tau(t, component)| against ``tau_threshold``."""
    if not 0.0 < tau_threshold < 1.0:
        raise InputError(f"tau_threshold must lie in (0, 1), got {tau_threshold}")
    taus = np.array([kendall_tau(times, s) for s in pc.scores])
    linear, rest = [], []
    for i, s in enumerate(pc.scores):
        (linear if abs(taus[i]) >= tau_threshold else rest).append((i, s))
    return SeparatedComponents(np.asarray(times, dtype=float), linear, rest, taus,
                               pc.explained_variance, tau_threshold, list(trends or []))
