import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from oracles import rips_pairs_bruteforce
from topomix import ComplexityError, InputError, synth_fig2
from topomix.decompose import classify_linear, pca
from topomix.persistence import (Cocycle, PersistenceConfig, PointCloud, ThresholdRule,
                                 circular_coordinate, delay_embed, enclosing_radius, lift,
                                 maxmin_landmarks, mixed_coordinates, periodic_coordinate,
                                 persistence_from_distances, rips_persistence,
                                 significant_cocycles, smooth_cocycle)
from topomix.persistence.embedding import (_maxmin_numba, _maxmin_numpy, _pairwise_numba,
                                           _pairwise_numpy, pairwise_distances)
from topomix.series_io import ResidualSet

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def _circle(n, radius=1.0, noise=0.0, seed=0):
    theta = 2 * np.pi * np.arange(n) / n
    pts = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    return pts + noise * np.random.default_rng(seed).normal(size=pts.shape)


def test_delay_embedding_layout():
    x = np.arange(10.0)
    cloud = delay_embed(x, r=3, eps=2)
    assert cloud.points.shape == (4, 4)
    np.testing.assert_array_equal(cloud.points[1], [1, 3, 5, 7])
    np.testing.assert_array_equal(cloud.source_time_index, np.arange(4))
    assert len(delay_embed(np.zeros(200))) == 180
    with pytest.raises(InputError):
        delay_embed(np.zeros(20), r=20)
    with pytest.raises(InputError):
        delay_embed(np.zeros(20), r=0)


def test_pairwise_implementations_agree():
    X = np.random.default_rng(0).normal(size=(70, 5))
    ref = cdist(X, X)
    np.testing.assert_allclose(_pairwise_numba(X), ref, atol=1e-12)
    np.testing.assert_allclose(_pairwise_numpy(X, chunk=16), ref, atol=1e-12)
    assert np.all(np.diag(pairwise_distances(X)) == 0)


def test_maxmin_implementations_agree_and_spread():
    X = np.random.default_rng(1).normal(size=(300, 3))
    a, b = _maxmin_numba(X, 40, 7), _maxmin_numpy(X, 40, 7)
    np.testing.assert_array_equal(a, b)
    assert len(set(a.tolist())) == 40
    # each new landmark is the farthest point from the ones before it
    D = cdist(X, X)
    for c in range(1, 40):
        assert D[a[c], a[:c]].min() == pytest.approx(D[:, a[:c]].min(axis=1).max())


def test_maxmin_landmarks_subset_behaviour():
    cloud = delay_embed(np.sin(np.linspace(0, 20, 400)))
    sub = maxmin_landmarks(cloud, 50, seed=3)
    assert len(sub) == 50
    assert np.all(np.diff(sub.source_time_index) > 0)
    again = maxmin_landmarks(cloud, 50, seed=3)
    np.testing.assert_array_equal(sub.points, again.points)
    assert maxmin_landmarks(cloud, 1000) is cloud
    with pytest.raises(InputError):
        maxmin_landmarks(cloud, 1)


def test_unit_square_diagram_and_cocycle():
    diag = persistence_from_distances(cdist(SQUARE, SQUARE))
    h0 = diag.dim(0)
    assert sorted(h0[:, 1].tolist()) == [1.0, 1.0, 1.0, math.inf]
    np.testing.assert_allclose(diag.h1, [[1.0, math.sqrt(2)]], atol=1e-12, rtol=0)
    (cocycle,) = diag.cocycles
    assert cocycle.edge_values in ({(2, 3): 1}, {(2, 3): -1}, {(0, 1): 1}, {(0, 1): -1},
                                   {(1, 2): 1}, {(1, 2): -1}, {(0, 3): 1}, {(0, 3): -1})
    assert cocycle.birth == 1.0 and cocycle.persistence == pytest.approx(math.sqrt(2) - 1)


@given(st.integers(3, 12), st.integers(0, 10**6), st.sampled_from([2, 3, 5, 47]),
       st.booleans())
@settings(max_examples=60, deadline=None)
def test_diagrams_match_bruteforce_reduction(m, seed, prime, integer_grid):
    rng = np.random.default_rng(seed)
    if integer_grid:  # many equal distances stress tie handling
        X = rng.integers(0, 3, size=(m, 2)).astype(float) + 1e-3 * np.arange(m)[:, None]
    else:
        X = rng.normal(size=(m, 3))
    D = cdist(X, X)
    scale = rng.uniform(0.3, 1.0) * D.max()
    diag = persistence_from_distances(D, max_scale=scale, p=prime)
    got = sorted((b, d, int(k)) for b, d, k in diag.pairs.tolist())
    assert got == rips_pairs_bruteforce(D, scale, prime)


def test_h0_has_one_essential_class_and_m_minus_one_finite():
    X = np.random.default_rng(5).normal(size=(30, 2))
    diag = persistence_from_distances(cdist(X, X))
    h0 = diag.dim(0)
    assert np.isinf(h0[:, 1]).sum() == 1 and len(h0) == 30


def _triangles_within(D, scale):
    m = D.shape[0]
    for a in range(m):
        for b in range(a + 1, m):
            if D[a, b] > scale:
                continue
            for c in range(b + 1, m):
                if D[a, c] <= scale and D[b, c] <= scale:
                    yield a, b, c


def test_cocycle_condition_holds_at_smoothing_scale():
    X = _circle(24, noise=0.05, seed=2)
    D = cdist(X, X)
    diag = persistence_from_distances(D)
    assert diag.cocycles
    for cocycle in diag.cocycles:
        z = cocycle.edge_values
        for a, b, c in _triangles_within(D, cocycle.scale_used):
            s = z.get((b, c), 0) - z.get((a, c), 0) + z.get((a, b), 0)
            assert s % cocycle.prime == 0


def test_coordinate_invariant_under_integer_coboundary():
    X = _circle(40, noise=0.02, seed=4)
    cloud = PointCloud(X)
    diag, _ = rips_persistence(cloud)
    (cocycle,) = significant_cocycles(diag)
    D = cdist(X, X)
    ii, jj = np.triu_indices(len(X), 1)
    inside = D[ii, jj] <= cocycle.scale_used
    edges = np.column_stack([ii[inside], jj[inside]])
    f = np.random.default_rng(0).integers(-3, 4, len(X))
    z = dict(cocycle.edge_values)
    values = np.array([z.get((a, b), 0) + f[b] - f[a] for a, b in edges])
    shifted = Cocycle(edges, values, cocycle.birth, cocycle.death, cocycle.scale_used)
    u = circular_coordinate(cloud, cocycle).values
    v = circular_coordinate(cloud, shifted).values
    # the coordinate is defined up to a rotation of the circle
    diff = u - v
    offset = np.angle(np.mean(np.exp(2j * np.pi * diff))) / (2 * np.pi)
    gap = np.abs((diff - offset + 0.5) % 1.0 - 0.5)
    assert gap.max() < 1e-7


def test_significance_rule_on_circle_and_noise():
    diag, _ = rips_persistence(PointCloud(_circle(60, noise=0.05)))
    assert len(significant_cocycles(diag)) == 1
    noise = np.random.default_rng(7).normal(size=(150, 21))
    diag, _ = rips_persistence(PointCloud(noise))
    assert significant_cocycles(diag) == []
    # a zero threshold keeps every bar, longest first
    everything = significant_cocycles(diag, ThresholdRule(0.0, 0.0))
    lengths = [c.persistence for c in everything]
    assert len(everything) == len(diag.h1) and lengths == sorted(lengths, reverse=True)


def test_threshold_rule_validation():
    with pytest.raises(InputError):
        ThresholdRule(rho=1.5)
    with pytest.raises(InputError):
        ThresholdRule(alpha=-0.1)


def test_guards():
    with pytest.raises(ComplexityError):
        rips_persistence(PointCloud(np.zeros((30, 2)) + np.arange(30)[:, None]), max_points=20)
    with pytest.raises(InputError):
        persistence_from_distances(cdist(SQUARE, SQUARE), p=4)


def test_lift_range():
    v = lift(np.arange(-100, 100), 47)
    assert v.min() == -23 and v.max() == 23
    assert np.all((v - np.arange(-100, 100)) % 47 == 0)
    assert lift(np.array([1]), 2)[0] == 1


def test_enclosing_radius():
    D = cdist(SQUARE, SQUARE)
    assert enclosing_radius(D) == pytest.approx(math.sqrt(2))


def test_smooth_cocycle_trivial_and_disconnected():
    X = np.array([[0.0, 0], [1, 0], [10, 0], [11, 0]])
    D = cdist(X, X)
    empty = Cocycle(np.zeros((0, 2), np.int64), np.zeros(0, np.int64), 0.0, 2.0, 1.5)
    with pytest.warns(UserWarning, match="components"):
        phi, n_comp = smooth_cocycle(D, empty)
    assert n_comp == 2 and np.all(phi == 0)


def test_periodic_coordinate_with_landmarks_tracks_phase():
    t = np.linspace(0, 12 * np.pi, 600)  # six periods, more points than landmarks
    coord, diag, sig = periodic_coordinate(np.sin(t), PersistenceConfig(landmarks=128))
    assert coord is not None and len(coord) == 600
    steps = np.diff(coord.values)
    winding = np.sum(steps - np.round(steps))
    assert abs(abs(winding) - 6) < 0.5


def test_mixed_coordinates_on_fig2_counts():
    ts = synth_fig2(200, 4 * np.pi, 0.2, 1)
    sep = classify_linear(pca(ResidualSet.identity(ts)), ts.times)
    mixed = mixed_coordinates(sep)
    assert (mixed.n_ell, mixed.n_c, mixed.n_noise) == (1, 1, 1)
    assert mixed.n_components == 3
    assert set(mixed.diagrams) == {i for i, _ in sep.rest}
    assert np.all((mixed.circular_parts[0].values >= 0) & (mixed.circular_parts[0].values < 1))
