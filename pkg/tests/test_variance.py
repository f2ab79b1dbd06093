import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from cutproject import diophantine as dio
from cutproject import geometry as geo
from cutproject import harmonic as hm
from cutproject import lattice as lat
from cutproject import modelset as ms
from cutproject import variance as v

from conftest import PHI, golden_spec, z2_spec

SPLIT = geo.SplitSpace(1, 1)


def z2_nv_closed_form(L, W):
    """Z^2 with an interval of length L below and W beside: the count is a product of two
    independent integer counts, each floor(len) or floor(len)+1."""
    def second_moment(x):
        k, f = math.floor(x), x - math.floor(x)
        return k * k * (1 - f) + (k + 1) ** 2 * f
    return second_moment(L) * second_moment(W) - (L * W) ** 2


@pytest.mark.parametrize("t,expected", [(2, 3.36), (5, 21.0), (7, 41.16)])
def test_z2_three_routes(t, expected):
    spec = z2_spec()
    assert z2_nv_closed_form(2 * t, 0.7) == pytest.approx(expected, abs=1e-12)
    diff = v.nv_diffraction(spec.lattice, SPLIT, spec.search, spec.window, t, 0.05)
    assert diff.tail_bound < 0.05
    assert diff.value <= expected + 1e-9
    assert diff.value + diff.tail_bound >= expected - 1e-9
    real = v.nv_realspace(spec.lattice, SPLIT, spec.search, spec.window, t)
    assert real == pytest.approx(expected, abs=1e-9)


def test_z2_diffraction_vs_montecarlo_t5():
    spec = z2_spec()
    diff = v.nv_diffraction(spec.lattice, SPLIT, spec.search, spec.window, 5, 0.05)
    mc = v.nv_montecarlo(spec, 5, 10_000, seed=7)
    assert abs(mc.nv - diff.value) <= 3 * mc.nv_stderr + diff.tail_bound


def test_golden_realspace_vs_diffraction():
    spec = golden_spec(search=geo.Ball([0.0], 1.0))
    for t in (1.5, 4.0):
        real = v.nv_realspace(spec.lattice, SPLIT, spec.search, spec.window, t)
        diff = v.nv_diffraction(spec.lattice, SPLIT, spec.search, spec.window, t, 1e-2)
        assert diff.value - 1e-9 <= real <= diff.value + diff.tail_bound + 1e-9


def test_shrinking_window_goes_to_zero():
    spec = z2_spec()
    vals = []
    for h in (1e-2, 1e-3, 1e-4):
        w = geo.Box([0.1], [h])
        d = v.nv_diffraction(spec.lattice, SPLIT, spec.search, w, 5, 1e-3)
        exact = z2_nv_closed_form(10, 2 * h)
        assert exact - 1e-9 <= d.value + d.tail_bound + 1e-9
        assert d.value <= exact + 1e-9
        vals.append(d.value)
    assert vals[0] > vals[1] > vals[2] >= 0
    assert vals[2] < 0.03  # linear in the window volume


def test_term_scaling_under_dilation():
    lattice = lat.golden()
    search = geo.Ball([0.0], 1.0)
    window = geo.IntervalUnion([(0.0, 1.0)])
    xi = np.concatenate(list(hm.dual_points(lattice, SPLIT, 6.0, 6.0)))
    xi = xi[np.any(xi != 0, axis=1)][:100]
    assert len(xi) == 100
    t = 3.7

    def term(tt, pts):
        a = np.abs(hm.fourier_indicator(geo.dilate(search, tt), SPLIT.down(pts))) ** 2
        b = np.abs(hm.fourier_indicator(window, SPLIT.left(pts))) ** 2
        return a * b / lattice.covolume**2

    # |F chi_{2t B}(x)|^2 = 2^2 |F chi_{t B}(2x)|^2 for the one-dimensional search interval
    moved = xi.copy()
    moved[:, 0] *= 2
    np.testing.assert_allclose(term(2 * t, xi), 4 * term(t, moved), rtol=1e-10, atol=1e-14)
    # and against the sinc closed form of the interval [-T, T)
    down = xi[:, 0]
    sinc = (np.sin(2 * np.pi * 2 * t * down) / (np.pi * down)) ** 2
    left = xi[:, 1]
    w = np.abs((1 - np.exp(-2j * np.pi * left)) / (2j * np.pi * left)) ** 2
    np.testing.assert_allclose(term(2 * t, xi), sinc * w / lattice.covolume**2,
                               rtol=1e-9, atol=1e-14)


def _random_config(rng):
    if rng.random() < 0.5:
        lattice = lat.golden()
    else:
        B = np.eye(2) + rng.normal(scale=0.3, size=(2, 2))
        lattice = lat.Lattice(B)
    lo = rng.uniform(-0.5, 0.2)
    window = geo.IntervalUnion([(lo, lo + rng.uniform(0.3, 1.2))])
    spec = ms.ModelSetSpec(SPLIT, lattice, rng.uniform(-1, 1, 2), window, geo.Box([0.5], [0.5]))
    return spec, float(rng.uniform(1, 20))


def test_zero_mean_random_configs(rng):
    for _ in range(20):
        spec, t = _random_config(rng)
        mc = v.nv_montecarlo(spec, t, 2000, seed=int(rng.integers(2**32)))
        assert abs(mc.mean) <= 3 * mc.mean_stderr + 1e-12


def _breaks(lo, hi):
    b = {0.0, 1.0}
    for x in (lo, hi):
        b |= {x % 1.0, (-x) % 1.0}
    return np.array(sorted(b))


@pytest.mark.parametrize("down,left,t", [((0.0, 1.0), (-0.3, 0.45), 2.3),
                                          ((-0.5, 0.5), (0.1, 0.25), 7.9)])
def test_zero_mean_exact_integral_z2(down, left, t):
    # the count is piecewise constant in the shift; sum it cell by cell over [0,1)^2
    search = geo.Box.from_bounds([down[0]], [down[1]])
    window = geo.Box.from_bounds([left[0]], [left[1]])
    spec = ms.ModelSetSpec(SPLIT, lat.identity(2), None, window, search)
    b0 = _breaks(t * down[0], t * down[1])
    b1 = _breaks(*left)
    m0, m1 = (b0[1:] + b0[:-1]) / 2, (b1[1:] + b1[:-1]) / 2
    s = np.stack(np.meshgrid(m0, m1, indexing="ij"), -1).reshape(-1, 2)
    area = np.outer(np.diff(b0), np.diff(b1)).ravel()
    counts = lat.count_in_many(spec.lattice, spec.region(t), -s)
    integral = math.fsum(area * counts)
    assert integral == pytest.approx(ms.main_term(spec, t), abs=1e-12)


def test_bernoulli_tiny_t():
    spec = golden_spec(window=geo.IntervalUnion([(0.0, 0.3)]))
    t = 0.01
    p = ms.main_term(spec, t)
    mc = v.nv_montecarlo(spec, t, 50_000, seed=3)
    vals = np.unique(np.round(mc.deltas, 12))
    assert set(vals) <= {round(-p, 12), round(1 - p, 12)}
    assert abs(mc.nv - p * (1 - p)) <= 3 * mc.nv_stderr
    real = v.nv_realspace(spec.lattice, SPLIT, spec.search, spec.window, t)
    assert real == pytest.approx(p * (1 - p), rel=1e-9)


def test_montecarlo_validation():
    with pytest.raises(v.VarianceError):
        v.nv_montecarlo(golden_spec(), 3, 50)


def test_fourier_coefficient_window_zero():
    lattice = lat.identity(2)
    window = geo.Box([0.0], [0.25])  # transform vanishes at integers 2, 4, ...
    c = v.fourier_coefficient(lattice, SPLIT, geo.Ball([0.0], 1.0), window, 3.3, [1, 2])
    assert abs(c) < 1e-15
    c = v.fourier_coefficient(lattice, SPLIT, geo.Ball([0.0], 1.0), window, 3.3, [1, 1])
    assert abs(c) > 1e-3
    with pytest.raises(v.VarianceError):
        v.fourier_coefficient(lattice, SPLIT, geo.Ball([0.0], 1.0), window, 3.3, [0, 0])


def test_fourier_coefficient_vs_torus_average():
    spec = golden_spec(search=geo.Ball([0.0], 1.0))
    t = 2.6
    mc = v.nv_montecarlo(spec, t, 40_000, seed=11)
    du = lat.dual(spec.lattice)
    for k in ([1, 0], [0, 1], [1, 1], [2, -1]):
        xi = du.basis @ np.array(k, dtype=float)
        c = v.fourier_coefficient(spec.lattice, SPLIT, spec.search, spec.window, t, xi)
        z = mc.deltas * np.exp(-2j * np.pi * (mc.shifts @ xi))
        n = len(z)
        for part, ref in ((z.real, c.real), (z.imag, c.imag)):
            se = np.std(part, ddof=1) / math.sqrt(n)
            assert abs(part.mean() - ref) <= 3 * se + 1e-12


def test_fourier_coefficient_bessel_leading_term():
    # unit disk search in a 2+1 split: |coef| against its leading oscillation
    split = geo.SplitSpace(2, 1)
    lattice = lat.Lattice(np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])
                          + np.array([[0, 0, 0], [0, 0, 0], [math.sqrt(2) - 1, math.sqrt(3) - 1, 0]]))
    window = geo.Box([0.0], [0.5])
    du = lat.dual(lattice)
    xi = du.basis @ np.array([1.0, 0.0, 0.0])
    rho = np.linalg.norm(xi[:2])
    for t in (20.0, 60.0, 150.0):
        # nudge t so the cosine factor sits at its peak
        phase = 2 * np.pi * t * rho - 3 * np.pi / 4
        t = t + ((-phase) % np.pi) / (2 * np.pi * rho)
        c = abs(v.fourier_coefficient(lattice, split, geo.Ball([0.0, 0.0], 1.0), window, t, xi))
        fw = abs(hm.fourier_indicator(window, xi[2:]))
        lead = t**0.5 / (math.pi * rho**1.5) * fw / lattice.covolume
        assert c >= 0.9 * lead


def test_parseval_subset():
    spec = golden_spec(search=geo.Ball([0.0], 1.0))
    t = 4.0
    d = v.nv_diffraction(spec.lattice, SPLIT, spec.search, spec.window, t, 1e-2)
    pts = np.concatenate(list(hm.dual_points(spec.lattice, SPLIT, 5.0, 5.0)))
    pts = pts[np.any(pts != 0, axis=1)]
    s = math.fsum(abs(v.fourier_coefficient(spec.lattice, SPLIT, spec.search, spec.window, t, p)) ** 2
                  for p in pts)
    assert 0 < s <= d.value + d.tail_bound


@pytest.mark.parametrize("t", [3.0, 8.0, 17.0])
def test_l1_witness_below_montecarlo(t):
    spec = golden_spec(search=geo.Ball([0.0], 1.0))
    w = v.l1_lower_witness(spec.lattice, SPLIT, spec.window, t, 6.0, search=spec.search)
    assert w.value > 0 and w.n_candidates > 0
    mc = v.nv_montecarlo(spec, t, 10_000, seed=5)
    assert mc.l1 >= w.value - 3 * mc.l1_stderr


def test_l1_witness_window_too_large():
    with pytest.raises(v.VarianceError):
        v.l1_lower_witness(lat.identity(2), SPLIT, geo.Box([0.0], [5.0]), 3.0, 0.5)


def test_variance_report():
    spec = z2_spec()
    rep = v.variance_report(spec, 5, "both", n_samples=2000, seed=1, tolerance=0.05)
    assert 21.0 - 0.05 <= rep.nv_diffraction <= 21.0 + 1e-9
    assert rep.nv_mc >= 0 and not rep.mean_flagged
    assert len(rep.as_row()) == 7
    with pytest.raises(v.VarianceError):
        v.variance_report(spec, 5, "neither")


def test_exact_sin2():
    assert v.exact_sin2(Fraction(0)) == 0
    assert v.exact_sin2(Fraction(1, 2)) == 0
    with mpmath.workdps(50):
        assert v.exact_sin2(Fraction(1, 4)) == pytest.approx(1.0, abs=1e-40)
        assert v.exact_sin2(Fraction(1, 8)) == pytest.approx(0.5, abs=1e-40)


def test_spike_scan_depth3():
    G = dio.liouville_preset(depth=3)
    rows = v.liouville_spike_scan(G, SPLIT, geo.Box([0.0], [0.25]), 0.3, tolerance=1e-2)
    assert len(rows) == 3
    data, _ = dio.liouville_data_of(G)
    for row, q, m in zip(rows, data.q, data.m):
        assert row.q_minus_m == q - m
        assert row.sin2_arg == (Fraction(3, 10) * (q - m)) % 1
        assert 0 <= row.sin2 <= 1
        assert float(mpmath.mpf(row.rhs)) >= 0
    evaluable = [r for r in rows if r.holds is not None]
    assert len(evaluable) >= 2
    assert all(r.holds for r in evaluable)
    assert rows[-1].t is None and rows[-1].holds is None
    assert rows[-1].log2_t > 1000


def test_spike_scan_needs_liouville_dual():
    with pytest.raises(v.VarianceError):
        v.liouville_spike_scan(lat.golden(), SPLIT, geo.Box([0.0], [0.25]), 0.3)


def test_surrogate_spike_factor():
    # a = [0; 2, 10^5, 1, 1, ...]: one huge partial quotient, so ||q_1 a|| is tiny at q_1 = 2
    a = 1 / (2 + 1 / (1e5 + 1 / PHI))
    G = lat.dual(lat.Lattice([[a, 1.0], [1.0, 1.0]]))
    search = geo.Box([0.0], [0.25])
    window = geo.Box([0.0], [0.3])
    t1 = 1 / abs(2 * a - 1)
    nv = [v.nv_realspace(G, SPLIT, search, window, t) for t in (0.5 * t1, t1, 2 * t1)]
    assert nv[1] >= 5 * nv[2]
    assert nv[1] >= 5 * nv[0]
