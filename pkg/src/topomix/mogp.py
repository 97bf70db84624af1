"""Multi-output Gaussian process with a cluster-structured task covariance.

The penalty ``l1 * sum_c sum_{l in c} |f_l - mean_c|^2 + l2 * sum_c m_c |mean_c|^2``
is the quadratic form ``f' P f`` with ``P = l1 (I - U) + l2 U``, where ``U``
averages within clusters. Its inverse ``B = (I - U) / l1 + U / l2`` is used as
the task covariance of a separable kernel ``B[l, l'] * k(t, t')``.
"""
from __future__ import annotations

import functools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import _accel
from .cluster import Clustering
from .errors import InputError, NumericalError
from .series_io import TimeSeriesSet, fit_line

LOG_2PI = np.log(2.0 * np.pi)


def block_projector(clustering: Clustering) -> np.ndarray:
    """Orthogonal projector onto within-cluster constant vectors."""
    a = clustering.assignments
    same = a[:, None] == a[None, :]
    return np.where(same, 1.0 / clustering.sizes[a][:, None], 0.0)


@dataclass(frozen=True)
class TaskMatrix:
    B: np.ndarray
    lambda1: float
    lambda2: float
    clustering: Clustering

    @property
    def penalty(self) -> np.ndarray:
        """``l1 (I - U) + l2 U``, the matrix whose inverse is ``B``."""
        U = block_projector(self.clustering)
        return self.lambda1 * (np.eye(U.shape[0]) - U) + self.lambda2 * U


def task_matrix(clustering: Clustering, lambda1: float, lambda2: float) -> TaskMatrix:
    if lambda1 <= 0 or lambda2 <= 0:
        raise InputError("lambda1 and lambda2 must be positive")
    U = block_projector(clustering)
    B = (np.eye(U.shape[0]) - U) / lambda1 + U / lambda2
    return TaskMatrix(B, float(lambda1), float(lambda2), clustering)


def sq_l2(u, v=0.0) -> float:
    """Squared L2 distance divided by the number of grid points."""
    d = np.asarray(u, dtype=float) - v
    return float(np.dot(d, d) / d.size)


def regularizer(values, clustering: Clustering, lambda1: float, lambda2: float,
                dist=None, norm=None, return_terms: bool = False):
    """Within-cluster spread plus size-weighted centroid magnitude.

    ``dist(curve, centroid)`` defaults to :func:`sq_l2`; pass e.g. a squared
    curve distance for diagnostics. ``norm`` defaults to ``sq_l2(g)``.
    """
    if lambda1 <= 0 or lambda2 <= 0:
        raise InputError("lambda1 and lambda2 must be positive")
    values = np.atleast_2d(np.asarray(getattr(values, "values", values), dtype=float))
    dist = dist or sq_l2
    norm = norm or sq_l2
    spread = 0.0
    magnitude = 0.0
    for c in range(clustering.r):
        idx = clustering.members(c)
        centroid = values[idx].mean(axis=0)
        spread += sum(dist(values[l], centroid) for l in idx)
        magnitude += idx.size * norm(centroid)
    first, second = lambda1 * spread, lambda2 * magnitude
    return (first, second) if return_terms else first + second


@dataclass(frozen=True)
class HyperParams:
    variance: float
    length_scale: float
    noise_variance: float

    def __post_init__(self):
        if min(self.variance, self.length_scale, self.noise_variance) <= 0:
            raise InputError(f"hyperparameters must be positive: {self}")


def se_kernel(ta, tb, variance: float, length_scale: float) -> np.ndarray:
    ta = np.asarray(ta, dtype=float)
    tb = np.asarray(tb, dtype=float)
    return variance * np.exp(-0.5 * ((ta[:, None] - tb[None, :]) / length_scale) ** 2)


def build_gram(hyper: HyperParams, B, times_a, tasks_a, times_b=None, tasks_b=None) -> np.ndarray:
    """``B[task_a, task_b] * k(t_a, t_b)``; with only ``a`` given, the training
    Gram including the noise diagonal."""
    B = np.asarray(B, dtype=float)
    tasks_a = np.asarray(tasks_a, dtype=np.int64)
    train = times_b is None
    if train:
        times_b, tasks_b = times_a, tasks_a
    tasks_b = np.asarray(tasks_b, dtype=np.int64)
    K = B[np.ix_(tasks_a, tasks_b)] * se_kernel(times_a, times_b, hyper.variance, hyper.length_scale)
    if train:
        K[np.diag_indices_from(K)] += hyper.noise_variance
    return K


def cholesky_jitter(K, start=1e-10, stop=1e-4):
    """Cholesky factor, adding diagonal jitter (relative to the mean diagonal)
    ten-fold per retry. Returns ``(factor, jitter_used)``."""
    scale = float(np.mean(np.diag(K))) or 1.0
    try:
        return linalg.cho_factor(K, lower=True), 0.0
    except linalg.LinAlgError:
        pass
    rel = start
    while rel <= stop * (1 + 1e-9):
        try:
            Kj = K + rel * scale * np.eye(K.shape[0])
            return linalg.cho_factor(Kj, lower=True), rel
        except linalg.LinAlgError:
            rel *= 10.0
    raise NumericalError(f"Gram matrix not positive definite even with jitter {stop:g} (relative)")


def log_marginal_likelihood_dense(K, y) -> tuple:
    """Gaussian log evidence of ``y`` under covariance ``K``; returns (value, jitter)."""
    (L, lower), jitter = cholesky_jitter(K)
    alpha = linalg.cho_solve((L, lower), y)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return float(-0.5 * y @ alpha - 0.5 * logdet - 0.5 * y.size * LOG_2PI), jitter


class _KronEigen:
    """Eigenbases of B and of the time kernel for a fully observed grid."""

    def __init__(self, B, times, length_scale):
        self.lam_b, self.Q_b = np.linalg.eigh(B)
        Kt = se_kernel(times, times, 1.0, length_scale)
        self.lam_t, self.Q_t = np.linalg.eigh(Kt)
        self.lam_t = np.clip(self.lam_t, 0.0, None)

    def spectrum(self, variance, noise):
        return variance * np.outer(self.lam_b, self.lam_t) + noise

    def project(self, Y):
        return self.Q_b.T @ Y @ self.Q_t

    def log_likelihood(self, Y, variance, noise):
        s = self.spectrum(variance, noise)
        Yt = self.project(Y)
        return float(-0.5 * np.sum(Yt**2 / s) - 0.5 * np.sum(np.log(s)) - 0.5 * Y.size * LOG_2PI)


def default_hyper_grid(times, values) -> list:
    """Data-scaled grid: variance and noise relative to the pooled variance,
    length scales relative to the time span."""
    v = float(np.var(values)) or 1.0
    span = float(times[-1] - times[0])
    return [HyperParams(v * a, span * b, v * c)
            for a in (0.25, 0.5, 1.0, 2.0, 4.0)
            for b in (0.01, 0.02, 0.05, 0.1, 0.2)
            for c in (0.001, 0.01, 0.05, 0.2)]


@dataclass(frozen=True)
class MOGPModel:
    task: TaskMatrix
    hyper: HyperParams
    times: np.ndarray
    values: np.ndarray  # M x n training values (raw, trends not removed)
    mask: np.ndarray  # M x n, True where observed
    slopes: np.ndarray
    intercepts: np.ndarray
    log_likelihood: float = np.nan
    jitter: float = 0.0
    task_names: tuple = ()
    grid_size: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    def mean_function(self, times, task):
        return self.slopes[task] * np.asarray(times, dtype=float) + self.intercepts[task]

    @property
    def fully_observed(self) -> bool:
        return bool(self.mask.all())

    def _training(self):
        tasks, cols = np.nonzero(self.mask)
        y = self.values[tasks, cols] - (self.slopes[tasks] * self.times[cols] + self.intercepts[tasks])
        return self.times[cols], tasks, y

    @functools.cached_property
    def _solver(self):
        if self.fully_observed:
            eig = _KronEigen(self.task.B, self.times, self.hyper.length_scale)
            _, _, y = self._training()
            s = eig.spectrum(self.hyper.variance, self.hyper.noise_variance)
            alpha_t = eig.project(y.reshape(self.M, -1)) / s
            return ("kron", eig, s, alpha_t)
        t, tasks, y = self._training()
        K = build_gram(self.hyper, self.task.B, t, tasks)
        cf, jitter = cholesky_jitter(K)
        return ("dense", cf, linalg.cho_solve(cf, y), None)


def _fit_one(hyper, B, t, tasks, y):
    K = build_gram(hyper, B, t, tasks)
    return log_marginal_likelihood_dense(K, y)


def gp_fit(ts: TimeSeriesSet, clustering: Clustering, lambda1: float = 1.0,
           lambda2: float = 1.0, hyper_grid=None, mask=None, detrend: bool = False) -> MOGPModel:
    """Pick the grid point with the largest log marginal likelihood.

    ``mask`` (M x n booleans) restricts training to observed entries.
    ``detrend`` fits a per-task OLS line used as a fixed mean function.
    """
    values = np.asarray(ts.values, dtype=float)
    times = np.asarray(ts.times, dtype=float)
    M, n = values.shape
    if clustering.M != M:
        raise InputError(f"clustering covers {clustering.M} curves, data has {M}")
    mask = np.ones((M, n), bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (M, n) or not mask.any(axis=1).all():
        raise InputError("mask must be M x n with at least one observation per task")
    slopes, intercepts = np.zeros(M), np.zeros(M)
    if detrend:
        for l in range(M):
            if mask[l].sum() >= 2:
                slopes[l], intercepts[l] = fit_line(times[mask[l]], values[l, mask[l]])
            else:
                intercepts[l] = values[l, mask[l]].mean()
    resid = values - (slopes[:, None] * times[None, :] + intercepts[:, None])
    grid = list(hyper_grid) if hyper_grid is not None else default_hyper_grid(times, resid[mask])
    if not grid:
        raise InputError("hyperparameter grid is empty")
    task = task_matrix(clustering, lambda1, lambda2)

    scores = np.empty(len(grid))
    jitters = np.zeros(len(grid))
    if mask.all():
        eigs = {}
        for g, h in enumerate(grid):
            if h.length_scale not in eigs:
                eigs[h.length_scale] = _KronEigen(task.B, times, h.length_scale)
            scores[g] = eigs[h.length_scale].log_likelihood(resid, h.variance, h.noise_variance)
    else:
        tasks, cols = np.nonzero(mask)
        t, y = times[cols], resid[tasks, cols]
        workers = min(_accel.max_workers(), len(grid))
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                out = list(pool.map(lambda h: _fit_one(h, task.B, t, tasks, y), grid))
        else:
            out = [_fit_one(h, task.B, t, tasks, y) for h in grid]
        scores[:] = [o[0] for o in out]
        jitters[:] = [o[1] for o in out]

    best = int(np.argmax(scores))  # first maximum wins ties
    return MOGPModel(task, grid[best], times, values, mask, slopes, intercepts,
                     float(scores[best]), float(jitters[best]), tuple(ts.channel_names),
                     len(grid), {"grid_log_likelihood": scores.tolist()})


def gp_predict(model: MOGPModel, query_times, task: int):
    """Posterior mean and variance of the latent curve ``task`` at ``query_times``."""
    if not 0 <= task < model.M:
        raise InputError(f"task must lie in 0..{model.M - 1}, got {task}")
    q = np.atleast_1d(np.asarray(query_times, dtype=float))
    h = model.hyper
    B = model.task.B
    prior = h.variance * B[task, task]
    kind, a, b, c = model._solver
    if kind == "kron":
        eig, s, alpha_t = a, b, c
        kq = se_kernel(q, model.times, 1.0, h.length_scale) @ eig.Q_t  # nq x n
        bb = eig.Q_b.T @ B[task]  # M
        mean = h.variance * (kq @ (bb @ alpha_t))
        quad = h.variance**2 * ((kq**2) @ ((bb**2) @ (1.0 / s)))
    else:
        cf, alpha = a, b
        t, tasks, _ = model._training()
        Kx = B[task, tasks][None, :] * se_kernel(q, t, h.variance, h.length_scale)
        mean = Kx @ alpha
        quad = np.sum(Kx * linalg.cho_solve(cf, Kx.T).T, axis=1)
    var = prior - quad
    if np.any(var < -1e-10 * max(prior, 1.0)):
        raise NumericalError(f"negative predictive variance {var.min():.3g}; jitter {model.jitter:g}")
    return mean + model.mean_function(q, task), np.clip(var, 0.0, None)
