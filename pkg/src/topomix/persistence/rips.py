"""Degree 0/1 persistent cohomology of Vietoris-Rips filtrations over Z_p.

The H1 reduction works on the coboundary matrix (edges as columns, processed
in reverse filtration order) with the coboundary of each edge enumerated on
the fly rather than stored. Edges that kill an H0 class are cleared up front.
Simplices are ordered by (diameter, combinatorial index).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _accel
from ..errors import ComplexityError, InputError
from .embedding import PointCloud, pairwise_distances

DEFAULT_PRIME = 47
MAX_POINTS = 2048


def _is_prime(p):
    return p >= 2 and all(p % q for q in range(2, int(p**0.5) + 1))


def lift(values, p):
    """Representatives of Z_p residues in (-p/2, p/2]."""
    v = np.mod(np.asarray(values, dtype=np.int64), p)
    return np.where(v > p / 2.0, v - p, v)


@dataclass
class Cocycle:
    edges: np.ndarray  # k x 2 vertex pairs (i < j), cloud-local indices
    values: np.ndarray  # integer lift of each edge value
    birth: float
    death: float
    scale_used: float
    prime: int = DEFAULT_PRIME

    @property
    def persistence(self) -> float:
        return self.death - self.birth

    @property
    def edge_values(self) -> dict:
        return {(int(i), int(j)): int(v) for (i, j), v in zip(self.edges, self.values)}


@dataclass
class PersistenceDiagram:
    """Finite-or-infinite (birth, death, dim) triples plus H1 representatives.

    Zero-length pairs are omitted. ``cocycles[k]`` belongs to ``h1[k]``.
    """

    pairs: np.ndarray  # rows (birth, death, dim); death may be inf
    field_char: int = DEFAULT_PRIME
    cocycles: list = field(default_factory=list)
    max_scale: float = np.inf
    diameter: float = 0.0

    def dim(self, d: int) -> np.ndarray:
        return self.pairs[self.pairs[:, 2] == d, :2] if len(self.pairs) else np.zeros((0, 2))

    @property
    def h1(self) -> np.ndarray:
        return self.dim(1)


# --- kernel ----------------------------------------------------------------
# Compiled with numba when active, plain Python otherwise. A triangle's
# filtration code is (position of its longest edge) * n_triangles + key, which
# refines the diameter order and fits an int64 for up to MAX_POINTS vertices.

def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


def _tri_key(a, b, k, c2, c3):
    """Key of triangle {a, b, k} (a < b) and the sign of edge (a, b) in its boundary."""
    if k > b:
        return c3[k] + c2[b] + a, 1
    if k > a:
        return c3[b] + c2[k] + a, -1
    return c3[b] + c2[a] + k, 1


def _min_cofacet(pos, a, b, n_tri, c2, c3):
    """Earliest cofacet of edge (a, b): (code, sign), code -1 if none.

    Keys grow with the third vertex, so the first cofacet whose longest edge
    is (a, b) itself is the minimum and ends the scan.
    """
    m = pos.shape[0]
    pab = pos[a, b]
    best = -1
    best_k = -1
    for k in range(m):
        pak = pos[a, k]
        pbk = pos[b, k]
        if pak < 0 or pbk < 0 or k == a or k == b:
            continue
        top = max(pab, max(pak, pbk))
        if best_k < 0 or top < best:
            best = top
            best_k = k
            if top == pab:
                break
    if best_k < 0:
        return np.int64(-1), 0
    key, sign = _tri_key(a, b, best_k, c2, c3)
    return best * n_tri + key, sign


def _heap_push(heap, size, value):
    """Binary min-heap on a growable int64 array; returns (array, new size)."""
    if size == heap.shape[0]:
        bigger = np.empty(2 * size, np.int64)
        bigger[:size] = heap
        heap = bigger
    i = size
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent] <= value:
            break
        heap[i] = heap[parent]
        i = parent
    heap[i] = value
    return heap, size + 1


def _heap_pop(heap, size):
    """Remove the minimum (``size`` > 0); returns (value, new size)."""
    top = heap[0]
    size -= 1
    last = heap[size]
    i = 0
    while True:
        child = 2 * i + 1
        if child >= size:
            break
        if child + 1 < size and heap[child + 1] < heap[child]:
            child += 1
        if last <= heap[child]:
            break
        heap[i] = heap[child]
        i = child
    if size > 0:
        heap[i] = last
    return top, size


def _push_coboundary(heap, size, pos, a, b, coef, p, n_tri, c2, c3):
    """Push coef * delta(edge a b) onto the working-column heap.

    Entries pack ``code * p + coefficient`` into one integer.
    """
    m = pos.shape[0]
    pab = pos[a, b]
    for k in range(m):
        pak = pos[a, k]
        pbk = pos[b, k]
        if pak < 0 or pbk < 0 or k == a or k == b:
            continue
        key, sign = _tri_key(a, b, k, c2, c3)
        code = max(pab, max(pak, pbk)) * n_tri + key
        heap, size = _heap_push(heap, size, code * p + (coef if sign > 0 else (p - coef) % p))
    return heap, size


def _pop_pivot(heap, size, p):
    """Smallest code with a nonzero summed coefficient, or code -1.

    Returns (code, coefficient, heap, size); the pivot stays on the heap.
    """
    while size > 0:
        top, size = _heap_pop(heap, size)
        code = top // p
        c = top % p
        while size > 0 and heap[0] // p == code:
            nxt, size = _heap_pop(heap, size)
            c += nxt % p
        c %= p
        if c != 0:
            heap, size = _heap_push(heap, size, code * p + c)
            return code, c, heap, size
    return np.int64(-1), np.int64(0), heap, size


def _slot(keys, key):
    """Open-addressing slot for ``key``: where it lives, or the empty slot to use."""
    mask = keys.shape[0] - 1
    h = (key * 0x9E3779B1) & mask
    while keys[h] != -1 and keys[h] != key:
        h = (h + 1) & mask
    return h


def _rips_kernel(D, thr, p, inverse, c2, c3):
    m = D.shape[0]
    n_tri = c3[m]
    n_edges = 0
    for j in range(1, m):
        for i in range(j):
            if D[i, j] <= thr:
                n_edges += 1
    ei = np.empty(n_edges, np.int64)
    ej = np.empty(n_edges, np.int64)
    ed = np.empty(n_edges)
    q = 0
    for j in range(1, m):
        for i in range(j):
            if D[i, j] <= thr:
                ei[q] = i
                ej[q] = j
                ed[q] = D[i, j]
                q += 1
    order = np.argsort(ed, kind="mergesort")
    ei = ei[order]
    ej = ej[order]
    ed = ed[order]
    pos = np.full((m, m), -1, np.int64)
    for q in range(n_edges):
        pos[ei[q], ej[q]] = q
        pos[ej[q], ei[q]] = q

    # H0 by Kruskal; the merging edges are the cleared columns for H1
    parent = np.arange(m)
    cleared = np.zeros(n_edges, np.bool_)
    h0 = np.empty(max(m - 1, 0))
    n_h0 = 0
    for q in range(n_edges):
        ra = _find(parent, ei[q])
        rb = _find(parent, ej[q])
        if ra != rb:
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb
            cleared[q] = True
            h0[n_h0] = ed[q]
            n_h0 += 1

    # triangle code -> column whose reduced form has that pivot
    cap = 1
    while cap < 2 * n_edges + 2:
        cap *= 2
    piv_keys = np.full(cap, -1, np.int64)
    piv_cols = np.empty(cap, np.int64)
    pivot_coef = np.zeros(n_edges, np.int64)
    v_start = np.full(n_edges, -1, np.int64)
    v_len = np.zeros(n_edges, np.int64)
    v_edge = [np.int64(0)]
    v_edge.pop()
    v_coef = [np.int64(0)]
    v_coef.pop()
    h1_birth = [0.0]
    h1_birth.pop()
    h1_death = [0.0]
    h1_death.pop()
    h1_col = [np.int64(0)]
    h1_col.pop()

    heap = np.empty(1024, np.int64)
    for q in range(n_edges - 1, -1, -1):
        if cleared[q]:
            continue
        code, sign = _min_cofacet(pos, ei[q], ej[q], n_tri, c2, c3)
        c = np.int64(1) if sign > 0 else p - 1
        h = _slot(piv_keys, code) if code >= 0 else 0
        v_start[q] = len(v_edge)
        if code >= 0 and piv_keys[h] == code:
            work = dict()
            work[np.int64(q)] = np.int64(1)
            heap, size = _push_coboundary(heap, 0, pos, ei[q], ej[q], np.int64(1), p, n_tri,
                                          c2, c3)
            while code >= 0 and piv_keys[h] == code:
                other = piv_cols[h]
                f = (p - (c * inverse[pivot_coef[other]]) % p) % p
                for s in range(v_start[other], v_start[other] + v_len[other]):
                    e2 = v_edge[s]
                    c_add = (v_coef[s] * f) % p
                    work[e2] = (work.get(e2, np.int64(0)) + c_add) % p
                    heap, size = _push_coboundary(heap, size, pos, ei[e2], ej[e2], c_add, p,
                                                  n_tri, c2, c3)
                code, c, heap, size = _pop_pivot(heap, size, p)
                if code >= 0:
                    h = _slot(piv_keys, code)
            for e2, cv in work.items():
                if cv != 0:
                    v_edge.append(e2)
                    v_coef.append(cv)
        else:
            v_edge.append(np.int64(q))
            v_coef.append(np.int64(1))
        v_len[q] = len(v_edge) - v_start[q]
        if code >= 0:
            piv_keys[h] = code
            piv_cols[h] = q
            pivot_coef[q] = c
            death = ed[code // n_tri]
            if death > ed[q]:
                h1_birth.append(ed[q])
                h1_death.append(death)
                h1_col.append(np.int64(q))
        else:
            h1_birth.append(ed[q])
            h1_death.append(np.inf)
            h1_col.append(np.int64(q))

    return (h0[:n_h0], np.array(h1_birth), np.array(h1_death), np.array(h1_col),
            ei, ej, v_start, v_len, np.array(v_edge), np.array(v_coef))


if _accel.USE_NUMBA:
    _find = _accel.njit(_find)
    _tri_key = _accel.njit(_tri_key)
    _min_cofacet = _accel.njit(_min_cofacet)
    _heap_push = _accel.njit(_heap_push)
    _heap_pop = _accel.njit(_heap_pop)
    _push_coboundary = _accel.njit(_push_coboundary)
    _pop_pivot = _accel.njit(_pop_pivot)
    _slot = _accel.njit(_slot)
    rips_kernel = _accel.njit(_rips_kernel)
else:
    rips_kernel = _rips_kernel


def _binomials(m):
    k = np.arange(m + 1, dtype=np.int64)
    return k * (k - 1) // 2, k * (k - 1) * (k - 2) // 6


def enclosing_radius(D) -> float:
    """Smallest r at which some point is within r of every other point."""
    return float(D.max(axis=1).min()) if len(D) else 0.0


def persistence_from_distances(D, max_scale=None, p: int = DEFAULT_PRIME,
                               smoothing: float = 0.99, max_points: int = MAX_POINTS):
    """Degree 0 and 1 persistence of the Rips filtration of a distance matrix.

    Returns a PersistenceDiagram whose ``cocycles`` hold one representative
    per H1 pair, evaluated at ``birth + smoothing * (death - birth)``.
    """
    D = np.ascontiguousarray(D, dtype=float)
    m = D.shape[0]
    if D.shape != (m, m):
        raise InputError("distance matrix must be square")
    if m > max_points:
        raise ComplexityError(
            f"{m} points exceed the cap of {max_points}; subsample with maxmin_landmarks first"
        )
    if not _is_prime(p):
        raise InputError(f"field characteristic must be prime, got {p}")
    if max_scale is None:
        max_scale = enclosing_radius(D)
    if max_scale <= 0 and m > 1:
        raise InputError("max_scale must be positive")
    diameter = float(D.max()) if m else 0.0
    if m == 0:
        return PersistenceDiagram(np.zeros((0, 3)), p, [], max_scale, 0.0)

    inverse = np.zeros(p, np.int64)
    for a in range(1, p):
        inverse[a] = pow(a, p - 2, p)
    c2, c3 = _binomials(m)
    (h0, b1, d1, col, ei, ej, v_start, v_len, v_edge, v_coef) = rips_kernel(
        D, float(max_scale), np.int64(p), inverse, c2, c3)

    rows = [(0.0, float(d), 0) for d in h0 if d > 0]
    # one essential class per connected component at max_scale
    rows.extend([(0.0, np.inf, 0)] * (m - len(h0)))
    cocycles = []
    for birth, death, q in zip(b1, d1, col):
        birth, death = float(birth), float(death)
        rows.append((birth, death, 1))
        top = max_scale if np.isinf(death) else death
        scale = min(birth + smoothing * (top - birth), max_scale)
        s = slice(v_start[q], v_start[q] + v_len[q])
        edges = np.column_stack([ei[v_edge[s]], ej[v_edge[s]]])
        cocycles.append(Cocycle(edges, lift(v_coef[s], p), birth, death, scale, p))
    pairs = np.array(rows, dtype=float).reshape(-1, 3)
    return PersistenceDiagram(pairs, p, cocycles, float(max_scale), diameter)


def rips_persistence(cloud: PointCloud, max_scale=None, p: int = DEFAULT_PRIME,
                     max_points: int = MAX_POINTS, smoothing: float = 0.99):
    """Persistence of the Rips filtration on a point cloud.

    ``max_scale`` defaults to the enclosing radius, past which the complex is
    a cone and every H1 class has died.
    """
    if len(cloud) > max_points:
        raise ComplexityError(
            f"{len(cloud)} points exceed the cap of {max_points}; subsample with maxmin_landmarks first"
        )
    D = pairwise_distances(np.ascontiguousarray(cloud.points))
    diag = persistence_from_distances(D, max_scale, p, smoothing, max_points)
    return diag, diag.cocycles
