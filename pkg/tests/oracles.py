"""Slow, independent reference implementations used only by the tests."""
import itertools
import math

import numpy as np


def kendall_tau_pairs(t, x):
    """Tau-b by enumerating every pair (vectorized over the upper triangle)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    n = t.size
    iu = np.triu_indices(n, 1)
    dt = np.sign(t[None, :] - t[:, None])[iu].astype(np.int64)
    dx = np.sign(x[None, :] - x[:, None])[iu].astype(np.int64)
    s = int(np.sum(dt * dx))
    total = n * (n - 1) // 2
    a = total - int(np.sum(dt == 0))
    b = total - int(np.sum(dx == 0))
    if a == 0 or b == 0:
        return 0.0
    return s / math.sqrt(float(a) * float(b))


def rips_pairs_bruteforce(D, max_scale, p=47):
    """(birth, death, dim) for dims 0 and 1 by reducing the full boundary
    matrix of the Rips filtration over Z_p. Zero-length pairs are dropped."""
    m = D.shape[0]
    simplices = [(0.0, 0, (i,)) for i in range(m)]
    for i, j in itertools.combinations(range(m), 2):
        if D[i, j] <= max_scale:
            simplices.append((D[i, j], 1, (i, j)))
    for i, j, k in itertools.combinations(range(m), 3):
        d = max(D[i, j], D[i, k], D[j, k])
        if d <= max_scale:
            simplices.append((d, 2, (i, j, k)))
    simplices.sort()
    index = {s[2]: n for n, s in enumerate(simplices)}
    low_owner = {}
    paired = set()
    pairs = []
    for col, (value, dim, verts) in enumerate(simplices):
        if dim == 0:
            continue
        column = {}
        for r in range(len(verts)):
            face = verts[:r] + verts[r + 1:]
            column[index[face]] = (-1) ** r % p
        while column:
            low = max(column)
            if low not in low_owner:
                break
            other = low_owner[low]
            factor = column[low] * pow(other[low], p - 2, p) % p
            for row, v in other.items():
                nv = (column.get(row, 0) - factor * v) % p
                if nv:
                    column[row] = nv
                else:
                    column.pop(row, None)
        if column:
            low = max(column)
            low_owner[low] = column
            paired.update((low, col))
            birth = simplices[low][0]
            if value > birth:
                pairs.append((birth, value, simplices[low][1]))
    for n, (value, dim, _) in enumerate(simplices):
        if n not in paired and dim <= 1:
            pairs.append((value, math.inf, dim))
    return sorted(pairs)


def single_output_gp(times, y, variance, length_scale, noise, query):
    """Posterior mean and latent variance of a one-task SE-kernel GP."""
    def k(a, b):
        return variance * np.exp(-0.5 * ((a[:, None] - b[None, :]) / length_scale) ** 2)
    K = k(times, times) + noise * np.eye(times.size)
    Ks = k(query, times)
    mean = Ks @ np.linalg.solve(K, y)
    var = variance - np.einsum("ij,ji->i", Ks, np.linalg.solve(K, Ks.T))
    return mean, var


def gaussian_log_evidence_eig(K, y):
    """Log evidence via a symmetric eigendecomposition (no Cholesky)."""
    w, V = np.linalg.eigh(K)
    proj = V.T @ y
    return float(-0.5 * np.sum(proj**2 / w) - 0.5 * np.sum(np.log(w))
                 - 0.5 * y.size * np.log(2 * np.pi))
