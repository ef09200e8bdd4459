import itertools

import numpy as np
import pytest

from topgeo import _pykernels, kernels
from topgeo.errors import CardinalityError, DegenerateInputError
from topgeo.geometry import (NeighborIndex, NormalizationRecord, denormalize, fps,
                             group_subtract, inverse_distance_interpolate, knn,
                             normalize_unit_sphere)

BACKENDS = sorted(kernels.BACKENDS)


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    impl = kernels.BACKENDS[request.param]
    for name in ("fps", "knn", "nearest", "hungarian", "auction"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


# normalization ---------------------------------------------------------------


def test_normalize_two_points():
    out, rec = normalize_unit_sphere([[0, 0, 0], [2, 0, 0]])
    np.testing.assert_array_equal(out, [[-1, 0, 0], [1, 0, 0]])
    np.testing.assert_array_equal(rec.centroid, [1, 0, 0])
    assert rec.furthest_distance == 1.0


def test_normalize_idempotent():
    p, _ = normalize_unit_sphere(np.random.default_rng(0).normal(size=(50, 3)))
    q, rec = normalize_unit_sphere(p)
    np.testing.assert_allclose(q, p, atol=1e-15)
    np.testing.assert_allclose(rec.centroid, 0, atol=1e-15)
    assert abs(rec.furthest_distance - 1) < 1e-15


def test_normalize_round_trip():
    p = np.random.default_rng(1).normal(size=(100, 3)) * 7 + 3
    q, rec = normalize_unit_sphere(p)
    assert np.linalg.norm(q, axis=1).max() == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(denormalize(q, rec), p, atol=1e-12)


def test_normalize_degenerate():
    with pytest.raises(DegenerateInputError):
        normalize_unit_sphere(np.ones((5, 3)))


def test_denormalize_examples():
    p = np.random.default_rng(2).normal(size=(4, 3))
    ident = NormalizationRecord(np.zeros(3), 1.0)
    np.testing.assert_array_equal(denormalize(p, ident), p)
    out = denormalize([[1, 0, 0]], NormalizationRecord(np.ones(3), 2.0))
    np.testing.assert_array_equal(out, [[3, 1, 1]])


# fps ----------------------------------------------------------------------------


def _brute_fps(points, m):
    """Greedy FPS by enumerating every candidate with explicit tie rules."""
    c = np.array([sum(points[:, i]) / len(points) for i in range(3)])
    key = lambda i, d: (-d, *points[i], i)  # noqa: E731
    chosen = [min(range(len(points)), key=lambda i: key(i, float(((points[i] - c) ** 2).sum())))]
    while len(chosen) < m:
        rest = [i for i in range(len(points)) if i not in chosen]
        mind = {i: min(float(((points[i] - points[j]) ** 2).sum()) for j in chosen) for i in rest}
        chosen.append(min(rest, key=lambda i: key(i, mind[i])))
    return chosen


def test_fps_unit_square(backend):
    sq = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
    idx = fps(sq, 2)
    np.testing.assert_array_equal(sq[idx], [[0, 0, 0], [1, 1, 0]])
    assert list(idx) == _brute_fps(sq, 2)


def test_fps_full_and_single(backend):
    p = np.random.default_rng(3).normal(size=(12, 3))
    idx = fps(p, 12)
    assert sorted(idx) == list(range(12))
    assert list(idx) == _brute_fps(p, 12)
    assert list(fps(p, 1)) == [idx[0]]


def test_fps_matches_brute_force_with_duplicates(backend):
    rng = np.random.default_rng(4)
    for _ in range(10):
        p = np.round(rng.normal(size=(15, 3)) * 2) / 2
        assert list(fps(p, 8)) == _brute_fps(p, 8)


def test_fps_rejects_oversampling():
    with pytest.raises(CardinalityError):
        fps(np.zeros((3, 3)), 4)


def test_fps_permutation_invariant(backend):
    rng = np.random.default_rng(5)
    for _ in range(50):
        # coarse grid values create plenty of exact ties
        p = np.round(rng.normal(size=(40, 3)) * 2) / 2
        ref = p[fps(p, 10)]
        for _ in range(5):
            q = p[rng.permutation(len(p))]
            np.testing.assert_array_equal(q[fps(q, 10)], ref)


def _min_pairwise(p):
    d = np.linalg.norm(p[:, None] - p[None], axis=-1)
    return d[np.triu_indices(len(p), 1)].min()


def test_fps_spread_beats_random_subsets():
    rng = np.random.default_rng(6)
    for n in (16, 32, 64):
        p = rng.normal(size=(n, 3))
        m = n // 4
        target = _min_pairwise(p[fps(p, m)])
        # greedy FPS is a 2-approximation of the best spread, not optimal,
        # so compare against the typical random subset rather than every one
        rand = [_min_pairwise(p[rng.choice(n, m, replace=False)]) for _ in range(100)]
        assert target >= np.median(rand)
        assert np.mean([target >= r for r in rand]) >= 0.9


# knn -----------------------------------------------------------------------------


def test_knn_collinear(backend):
    p = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]], dtype=float)
    nbr = knn(p[:1], p, 2, exclude=[0])
    assert nbr.indices.tolist() == [[1, 2]]
    np.testing.assert_array_equal(nbr.distances, [[1.0, 2.0]])


def test_knn_all_others(backend):
    p = np.random.default_rng(7).normal(size=(6, 3))
    nbr = knn(p, p, 5, exclude="self")
    for i, row in enumerate(nbr.indices):
        assert sorted(row) == [j for j in range(6) if j != i]
    assert np.all(np.diff(nbr.distances, axis=1) >= 0)


def test_knn_too_few_candidates():
    with pytest.raises(CardinalityError):
        knn(np.zeros((4, 3)), np.zeros((4, 3)), 4, exclude="self")


def test_knn_duplicates_order_independent(backend):
    rng = np.random.default_rng(8)
    base = np.round(rng.normal(size=(30, 3)))
    for _ in range(50):
        perm = rng.permutation(30)
        a = knn(base, base, 6, exclude="self")
        q = base[perm]
        b = knn(q, q, 6, exclude="self")
        inv = np.argsort(perm)
        # compare neighbor coordinates row by row in the original order
        np.testing.assert_array_equal(q[b.indices][inv], base[a.indices])


def test_knn_matches_brute_sort(backend):
    rng = np.random.default_rng(9)
    src = np.round(rng.normal(size=(25, 3)) * 2) / 2
    qry = rng.normal(size=(7, 3))
    nbr = knn(qry, src, 5)
    for i, q in enumerate(qry):
        keys = sorted(range(25), key=lambda j: (float(((q - src[j]) ** 2).sum()), *src[j], j))
        assert list(nbr.indices[i]) == keys[:5]


def test_backends_agree():
    if "cython" not in kernels.BACKENDS:
        pytest.skip("compiled kernels not built")
    c = kernels.BACKENDS["cython"]
    rng = np.random.default_rng(10)
    for _ in range(20):
        p = np.ascontiguousarray(np.round(rng.normal(size=(200, 3)) * 3) / 3)
        cen = p.mean(axis=0)
        np.testing.assert_array_equal(c.fps(p, 50, cen), _pykernels.fps(p, 50, cen))
        ex = np.arange(200, dtype=np.int64)
        for a, b in zip(c.knn(p, p, 16, ex), _pykernels.knn(p, p, 16, ex)):
            np.testing.assert_array_equal(a, b)
        q = np.ascontiguousarray(rng.normal(size=(30, 3)))
        for a, b in zip(c.nearest(q, p), _pykernels.nearest(q, p)):
            np.testing.assert_array_equal(a, b)


# group_subtract ------------------------------------------------------------------


def test_group_subtract_sign():
    nbr = NeighborIndex(np.array([[0]]), np.zeros((1, 1)))
    out = group_subtract(np.zeros((1, 3)), np.array([[1.0, 2.0, 3.0]]), nbr)
    assert out.data.tolist() == [[[-1.0, -2.0, -3.0]]]


def test_group_subtract_equal_coordinates():
    p = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]])
    nbr = NeighborIndex(np.array([[1]]), np.zeros((1, 1)))
    assert group_subtract(p[:1], p, nbr).data.tolist() == [[[0.0, 0.0, 0.0]]]


def test_group_subtract_translation_invariant():
    rng = np.random.default_rng(11)
    for _ in range(20):
        # dyadic coordinates and integer offsets keep every sum exact
        p = np.round(rng.normal(size=(20, 3)) * 64) / 64
        nbr = knn(p, p, 4, exclude="self")
        t = rng.integers(-8, 8, size=3).astype(float)
        np.testing.assert_array_equal(group_subtract(p + t, p + t, nbr).data,
                                      group_subtract(p, p, nbr).data)


def test_group_subtract_bad_index():
    with pytest.raises(IndexError):
        group_subtract(np.zeros((1, 3)), np.zeros((2, 3)), NeighborIndex(np.array([[2]]),
                                                                           np.zeros((1, 1))))


# inverse distance interpolation --------------------------------------------------


def test_idw_hand_example():
    p = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [2, 0, 0]], dtype=float)
    x = np.array([[0.0], [1.0], [2.0], [4.0]])
    nbr = NeighborIndex(np.array([[1, 2, 3]]), np.array([[1.0, 1.0, 2.0]]))
    out = inverse_distance_interpolate(p, x, NeighborIndex(np.vstack([nbr.indices] * 4),
                                                           np.vstack([nbr.distances] * 4)))
    # weights 1/(d + 1e-8): (1 + 2 + 0.5*4) / 2.5, perturbed only at the 1e-8 level
    assert out.data[0, 0] == pytest.approx(2.0, abs=1e-7)


def test_idw_constant_features():
    p = np.random.default_rng(12).normal(size=(10, 3))
    x = np.full((10, 4), 2.5)
    out = inverse_distance_interpolate(p, x, knn(p, p, 3, exclude="self"))
    np.testing.assert_allclose(out.data, 2.5, rtol=1e-15)


def test_idw_within_neighbor_range():
    rng = np.random.default_rng(13)
    for _ in range(20):
        p = rng.normal(size=(15, 3))
        x = rng.normal(size=(15, 5))
        nbr = knn(p, p, 3, exclude="self")
        out = inverse_distance_interpolate(p, x, nbr).data
        g = x[nbr.indices]
        assert np.all(out >= g.min(axis=1) - 1e-12)
        assert np.all(out <= g.max(axis=1) + 1e-12)


def test_idw_requires_three_neighbors():
    p = np.random.default_rng(14).normal(size=(6, 3))
    with pytest.raises(CardinalityError):
        inverse_distance_interpolate(p, p, knn(p, p, 2, exclude="self"))


def test_brute_force_helper_self_consistent():
    # the FPS oracle itself: m = n enumerates every index exactly once
    p = np.random.default_rng(15).normal(size=(6, 3))
    assert sorted(_brute_fps(p, 6)) == list(range(6))
    assert len(set(itertools.permutations(range(3)))) == 6
