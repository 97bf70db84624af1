"""Average-linkage clustering of curves from a dissimilarity matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .metric import DistanceMatrix


@dataclass(frozen=True)
class Clustering:
    assignments: np.ndarray  # cluster id per curve, ids 0..r-1

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64)
        if a.ndim != 1 or a.size == 0:
            raise InputError("assignments must be a non-empty vector")
        r = int(a.max()) + 1
        if a.min() < 0 or np.any(np.bincount(a, minlength=r) == 0):
            raise InputError("cluster ids must be 0..r-1 with every cluster non-empty")
        object.__setattr__(self, "assignments", a)

    @classmethod
    def singletons(cls, M: int) -> "Clustering":
        return cls(np.arange(M))

    @property
    def r(self) -> int:
        return int(self.assignments.max()) + 1

    @property
    def M(self) -> int:
        return self.assignments.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.r)

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == c)

    def as_sets(self) -> set:
        return {frozenset(self.members(c).tolist()) for c in range(self.r)}


def hcluster(D: DistanceMatrix, r: int) -> Clustering:
    """Merge the closest pair of clusters (mean pairwise distance) until ``r``
    remain.

    Ties go to the pair whose smallest member indices are lexicographically
    lowest. Output ids are numbered by each cluster's smallest member.
    """
    E = D.entries if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)
    M = E.shape[0]
    if not 1 <= r <= M:
        raise InputError(f"need 1 <= r <= M={M}, got r={r}")
    groups = {i: [i] for i in range(M)}  # keyed by smallest member
    sums = {(i, j): E[i, j] for i in range(M) for j in range(i + 1, M)}
    while len(groups) > r:
        best, pair = np.inf, None
        for (a, b), s in sums.items():
            avg = s / (len(groups[a]) * len(groups[b]))
            if avg < best or (avg == best and (a, b) < pair):
                best, pair = avg, (a, b)
        a, b = pair
        groups[a] = sorted(groups[a] + groups.pop(b))
        for k in list(groups):
            if k in (a,):
                continue
            ka = (min(a, k), max(a, k))
            kb = (min(b, k), max(b, k))
            sums[ka] = sums[ka] + sums.pop(kb)
        sums.pop((a, b))
    labels = np.empty(M, np.int64)
    for cid, key in enumerate(sorted(groups)):
        labels[groups[key]] = cid
    return Clustering(labels)


def centroid_series(values, clustering: Clustering, c: int) -> np.ndarray:
    """Pointwise mean of the member curves of cluster ``c``."""
    values = np.asarray(getattr(values, "values", values), dtype=float)
    if not 0 <= c < clustering.r:
        raise InputError(f"no cluster {c}; clustering has {clustering.r}")
    return values[clustering.members(c)].mean(axis=0)
