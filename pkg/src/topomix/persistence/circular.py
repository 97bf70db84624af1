"""Circular coordinates from persistent 1-cocycles and mixed-coordinate assembly."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import cg

from .. import _accel
from ..errors import InputError
from .embedding import PointCloud, delay_embed, maxmin_landmarks, pairwise_distances
from .rips import DEFAULT_PRIME, MAX_POINTS, Cocycle, PersistenceDiagram, rips_persistence


@dataclass(frozen=True)
class ThresholdRule:
    """Keep bars at least ``rho`` times the longest H1 bar and ``alpha`` times
    the cloud diameter."""

    rho: float = 0.5
    alpha: float = 0.25

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise InputError(f"rho must lie in [0, 1], got {self.rho}")
        if self.alpha < 0.0:
            raise InputError(f"alpha must be non-negative, got {self.alpha}")


@dataclass
class CircularCoordinate:
    values: np.ndarray  # one value in [0, 1) per series index
    persistence: float = 0.0
    source_component: int = -1
    birth: float = 0.0
    death: float = 0.0

    def __len__(self):
        return self.values.size


@dataclass
class MixedCoordinates:
    """Linear components followed by circle-valued ones; noise dropped."""

    times: np.ndarray
    linear_parts: list  # [(component index, scores)]
    circular_parts: list  # [CircularCoordinate]
    n_noise: int
    tau_values: np.ndarray
    persistence: dict = field(default_factory=dict)  # component -> [significant bar lengths]
    diagrams: dict = field(default_factory=dict)  # component -> PersistenceDiagram
    noise_components: list = field(default_factory=list)

    @property
    def n_ell(self) -> int:
        return len(self.linear_parts)

    @property
    def n_c(self) -> int:
        return len(self.circular_parts)

    @property
    def n_components(self) -> int:
        return self.n_ell + self.n_c + self.n_noise


@dataclass(frozen=True)
class PersistenceConfig:
    delay_r: int = 20
    delay_eps: int = 1
    prime: int = DEFAULT_PRIME
    rho: float = 0.5
    alpha: float = 0.25
    landmarks: int = 256
    max_points: int = MAX_POINTS
    smoothing: float = 0.99
    seed: int = 0

    @property
    def rule(self) -> ThresholdRule:
        return ThresholdRule(self.rho, self.alpha)


def bar_lengths(diag: PersistenceDiagram) -> np.ndarray:
    """H1 bar lengths, essential bars measured up to ``max_scale``."""
    h1 = diag.h1
    if not len(h1):
        return np.zeros(0)
    return np.minimum(h1[:, 1], diag.max_scale) - h1[:, 0]


def significant_cocycles(diag: PersistenceDiagram, rule: ThresholdRule = ThresholdRule()):
    """Cocycles whose bars pass ``rule``, longest first."""
    lengths = bar_lengths(diag)
    if not lengths.size:
        return []
    cut = max(rule.rho * lengths.max(), rule.alpha * diag.diameter)
    keep = np.flatnonzero(lengths >= cut)
    keep = keep[np.argsort(-lengths[keep], kind="stable")]
    return [diag.cocycles[k] for k in keep]


def _coboundary(edges, n_vertices):
    k = edges.shape[0]
    rows = np.repeat(np.arange(k), 2)
    cols = edges.ravel()
    data = np.tile([-1.0, 1.0], k)
    return sparse.csr_matrix((data, (rows, cols)), shape=(k, n_vertices))


def smooth_cocycle(D, cocycle: Cocycle, tol: float = 1e-10):
    """Real vertex values minimizing ||cocycle - delta phi|| on the 1-skeleton
    at ``cocycle.scale_used``.

    Returns ``(phi, n_components)``; with several components the relative
    offsets between them are arbitrary.
    """
    m = D.shape[0]
    ii, jj = np.triu_indices(m, 1)
    inside = D[ii, jj] <= cocycle.scale_used
    edges = np.column_stack([ii[inside], jj[inside]])
    z = np.zeros(edges.shape[0])
    if len(cocycle.edges):
        ckeys = cocycle.edges[:, 1] * m + cocycle.edges[:, 0]
        order = np.argsort(ckeys)
        ckeys, cvals = ckeys[order], np.asarray(cocycle.values, dtype=float)[order]
        ekeys = edges[:, 1] * m + edges[:, 0]
        pos = np.clip(np.searchsorted(ckeys, ekeys), 0, ckeys.size - 1)
        hit = ckeys[pos] == ekeys
        z[hit] = cvals[pos[hit]]
    delta = _coboundary(edges, m)
    lap = (delta.T @ delta).tocsr()
    rhs = delta.T @ z
    n_comp, _ = connected_components(lap, directed=False)
    if n_comp > 1:
        warnings.warn(f"1-skeleton has {n_comp} components at scale {cocycle.scale_used:.4g}; "
                      "offsets between components are arbitrary", stacklevel=2)
    if not np.any(rhs):
        return np.zeros(m), n_comp
    phi, info = cg(lap, rhs, rtol=tol, atol=0.0, maxiter=10 * m)
    if info > 0:
        warnings.warn(f"conjugate gradient stopped after {info} iterations", stacklevel=2)
    return phi, n_comp


def _wrap01(v):
    v = np.mod(v, 1.0)
    v[v >= 1.0] = 0.0
    return v


def circular_coordinate(cloud: PointCloud, cocycle: Cocycle, n_total: int | None = None,
                        full_cloud: PointCloud | None = None,
                        source_component: int = -1) -> CircularCoordinate:
    """Circle-valued coordinate per series index from a cocycle on ``cloud``.

    With ``full_cloud`` given, ``cloud`` is a landmark subset and every point
    of the full cloud takes the value of its nearest landmark. Series indices
    with no point (the tail cut off by delay embedding) repeat the last value.
    """
    D = pairwise_distances(np.ascontiguousarray(cloud.points))
    phi, _ = smooth_cocycle(D, cocycle)
    vals = _wrap01(phi)
    idx = cloud.source_time_index
    if full_cloud is not None and len(full_cloud) != len(cloud):
        lm = cloud.points
        nearest = np.empty(len(full_cloud), np.int64)
        for lo in range(0, len(full_cloud), 512):
            diff = full_cloud.points[lo:lo + 512, None, :] - lm[None, :, :]
            nearest[lo:lo + 512] = np.argmin(np.einsum("ijk,ijk->ij", diff, diff), axis=1)
        vals = vals[nearest]
        idx = full_cloud.source_time_index
    if n_total is None:
        n_total = int(idx.max()) + 1
    order = np.argsort(idx, kind="stable")
    idx, vals = idx[order], vals[order]
    # value of the latest point at or before each series index
    at = np.searchsorted(idx, np.arange(n_total), side="right") - 1
    out = vals[np.clip(at, 0, None)]
    return CircularCoordinate(out, cocycle.persistence, source_component,
                              cocycle.birth, cocycle.death)


def periodic_coordinate(x, cfg: PersistenceConfig = PersistenceConfig(), component: int = -1):
    """Delay-embed one series and test it for a persistent loop.

    Returns ``(coordinate or None, diagram, significant cocycles)``.
    """
    x = np.asarray(x, dtype=float)
    full = delay_embed(x, cfg.delay_r, cfg.delay_eps)
    cloud = full
    if len(full) > cfg.landmarks:
        sub_seed = int(np.random.SeedSequence([cfg.seed, 0x1A4D, max(component, 0)])
                       .generate_state(1)[0])
        cloud = maxmin_landmarks(full, cfg.landmarks, seed=sub_seed)
    diag, _ = rips_persistence(cloud, p=cfg.prime, max_points=cfg.max_points,
                               smoothing=cfg.smoothing)
    sig = significant_cocycles(diag, cfg.rule)
    if not sig:
        return None, diag, sig
    coord = circular_coordinate(cloud, sig[0], x.size, full_cloud=full,
                                source_component=component)
    return coord, diag, sig


def mixed_coordinates(sep, cfg: PersistenceConfig = PersistenceConfig()) -> MixedCoordinates:
    """Keep each non-linear component whose delay embedding carries a
    significant loop as a circular coordinate; count the rest as noise."""
    jobs = list(sep.rest)
    workers = min(_accel.max_workers(), max(len(jobs), 1))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda j: periodic_coordinate(j[1], cfg, j[0]), jobs))
    else:
        results = [periodic_coordinate(s, cfg, i) for i, s in jobs]

    circular, noise, pers, diagrams = [], [], {}, {}
    for (i, _), (coord, diag, sig) in zip(jobs, results):
        diagrams[i] = diag
        pers[i] = [float(c.persistence) for c in sig]
        if coord is None:
            noise.append(i)
        else:
            circular.append(coord)
    return MixedCoordinates(sep.times, list(sep.linear), circular, len(noise), sep.tau_values,
                            pers, diagrams, noise)
