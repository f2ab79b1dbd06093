import math

import numpy as np
import pytest

from cutproject import geometry as geo
from cutproject import lattice as lat
from conftest import PHI, PHIBAR, brute_count


def test_dual_examples():
    assert np.allclose(lat.dual(lat.identity(3)).basis, np.eye(3))
    assert np.allclose(lat.dual(lat.Lattice(np.diag([2.0, 0.5]))).basis, np.diag([0.5, 2.0]))
    g = lat.golden()
    assert g.covolume == pytest.approx(math.sqrt(5), rel=1e-12)
    assert lat.dual(g).covolume == pytest.approx(1 / math.sqrt(5), rel=1e-12)
    assert np.array_equal(g.basis, np.array([[1, PHI], [1, PHIBAR]]))


def test_dual_pairing_integral(rng):
    L = lat.golden()
    D = lat.dual(L)
    a = lat.enumerate_in(L, geo.Ball([0, 0], 20)).points
    b = lat.enumerate_in(D, geo.Ball([0, 0], 20)).points
    i = rng.integers(len(a), size=1000)
    j = rng.integers(len(b), size=1000)
    pair = np.sum(a[i] * b[j], axis=1)
    assert np.max(np.abs(pair - np.round(pair))) < 1e-9


def test_double_dual(rng):
    for _ in range(10):
        B = rng.normal(size=(3, 3))
        L = lat.Lattice(B)
        DD = lat.dual(lat.dual(L))
        c = L.coords_of(DD.basis.T)
        assert np.max(np.abs(c - np.round(c))) < 1e-9
        assert DD.covolume == pytest.approx(L.covolume, rel=1e-12)
        assert L.covolume * lat.dual(L).covolume == pytest.approx(1, rel=1e-12)


def test_singular_basis():
    with pytest.raises(lat.LatticeError):
        lat.Lattice([[1, 2], [2, 4]])


def test_enumerate_examples():
    Z2 = lat.identity(2)
    res = lat.enumerate_in(Z2, geo.Box([0, 0], [1.5, 1.5]))
    assert len(res) == 9
    row = geo.ProductRegion(geo.Box([5.0], [5.0], closed=True), geo.Box([0], [0.25], closed=True))
    res = lat.enumerate_in(Z2, row)
    assert sorted(map(tuple, res.coords)) == [(k, 0) for k in range(11)]
    region = geo.ProductRegion(geo.Box([50.0], [50.0]), geo.IntervalUnion([(0, 1)]))
    res = lat.enumerate_in(lat.golden(), region)
    oracle = brute_count(lat.golden().basis, region, [0, 0], 200)
    assert sorted(map(tuple, res.coords)) == sorted(map(tuple, oracle))


def test_enumerate_lexicographic_and_consistent():
    L = lat.golden()
    region = geo.ProductRegion(geo.Ball([0.0], 30.0), geo.IntervalUnion([(-0.5, 0.7)]))
    res = lat.enumerate_in(L, region, [0.1, -0.2])
    c = [tuple(k) for k in res.coords]
    assert c == sorted(c)
    assert np.allclose(res.points, L.points_from_coords(res.coords), rtol=1e-10, atol=1e-12)


def _random_lattice(rng, d):
    while True:
        B = rng.normal(size=(d, d))
        if np.linalg.cond(B) <= 100:
            return lat.Lattice(B)


def test_enumeration_completeness_random(rng):
    for trial in range(50):
        d = 2 if trial < 25 else 3
        L = _random_lattice(rng, d)
        if d == 2:
            region = geo.ProductRegion(geo.Ball([rng.normal()], 2.0),
                                       geo.Box([rng.normal()], [1.5]))
        else:
            region = geo.ProductRegion(geo.Box(rng.normal(size=2), [1.5, 1.0]),
                                       geo.IntervalUnion([(-1.0, 0.5)]))
        shift = rng.normal(size=d)
        res = lat.enumerate_in(L, region, shift)
        # 2x enlarged integer box around the coordinate range of the region
        lo, hi = geo.bounding_box(region)
        corners = np.stack(np.meshgrid(*zip(lo, hi), indexing="ij"), -1).reshape(-1, d)
        k = np.abs(L.coords_of(corners - shift)).max()
        n_max = int(2 * math.ceil(k) + 2)
        oracle = brute_count(L.basis, region, shift, n_max)
        assert sorted(map(tuple, res.coords)) == sorted(map(tuple, oracle)), trial
        assert lat.count_in(L, region, shift) == len(oracle)


def test_count_in_many_matches_enumeration(rng):
    L = lat.golden()
    region = geo.ProductRegion(geo.Ball([0.0], 25.0), geo.IntervalUnion([(0, 1)]))
    shifts = rng.normal(size=(40, 2)) * 3
    many = lat.count_in_many(L, region, shifts)
    assert [len(lat.enumerate_in(L, region, s)) for s in shifts] == list(many)


def test_unbounded_or_budget():
    with pytest.raises(lat.BudgetError):
        lat.enumerate_in(lat.identity(2), geo.Box([0, 0], [1000, 1000]), max_points=10)


def test_sample_fundamental():
    s = lat.sample_fundamental(lat.identity(3), 1000, seed=1)
    assert np.all((s >= 0) & (s < 1))
    s = lat.sample_fundamental(lat.Lattice(np.diag([2.0, 3.0])), 10_000, seed=2)
    assert np.all((s >= 0) & (s < [2, 3]))
    err = s.std(axis=0) / math.sqrt(len(s))
    assert np.all(np.abs(s.mean(axis=0) - [1, 1.5]) < 3 * err)
    assert np.array_equal(s, lat.sample_fundamental(lat.Lattice(np.diag([2.0, 3.0])), 10_000, seed=2))
    L = lat.golden()
    s = lat.sample_fundamental(L, 500, seed=3)
    k, _ = lat.reduce_to_fundamental(L, s)
    assert np.all(k == 0)


def test_reduce_to_fundamental(rng):
    k, r = lat.reduce_to_fundamental(lat.identity(2), [2.5, -0.25])
    assert tuple(k) == (2, -1) and np.allclose(r, [0.5, 0.75])
    L = lat.golden()
    k, r = lat.reduce_to_fundamental(L, L.points_from_coords(np.array([3, -7])))
    assert tuple(k) == (3, -7) and np.allclose(r, 0, atol=1e-12)
    x = rng.normal(size=(1000, 2)) * 50
    x[0] = [math.pi, math.e]
    k, r = lat.reduce_to_fundamental(L, x)
    u = L.coords_of(r)
    assert np.all((u >= 0) & (u < 1))
    assert np.allclose(L.points_from_coords(k) + r, x, atol=1e-9)


def test_lll_reduce(rng):
    B = np.array([[1.0, 0.0], [1000.0, 1.0]]).T  # badly skewed basis of Z^2
    R, U = lat.lll_reduce(B)
    assert np.allclose(B @ U, R)
    assert round(abs(np.linalg.det(U))) == 1
    assert np.allclose(sorted(np.linalg.norm(R, axis=0)), [1, 1])


def test_lattice_json():
    assert np.allclose(lat.lattice_from_json({"preset": "golden"}).basis, lat.golden().basis)
    assert np.allclose(lat.lattice_from_json({"basis": [[2, 0], [0, 1]]}).basis, np.diag([2, 1]))
    with pytest.raises(lat.LatticeError):
        lat.lattice_from_json({"basis": [[1, 0], [0, 1]], "preset": "golden"})
    with pytest.raises(lat.LatticeError):
        lat.lattice_from_json({"preset": "golden", "extra": 1})
