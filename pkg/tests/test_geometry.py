import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutproject import geometry as geo


def test_volumes_closed_form():
    assert geo.volume(geo.Ball([0, 0], 1)) == pytest.approx(math.pi, abs=1e-12)
    assert geo.volume(geo.Box([0, 0], [1, 2])) == 8
    assert geo.volume(geo.IntervalUnion([(0, 0.3), (0.5, 1)])) == pytest.approx(0.8, abs=1e-15)
    # n-ball volumes against the recursion V_m = 2 pi / m * V_{m-2}
    v = {0: 1.0, 1: 2.0}
    for m in range(2, 8):
        v[m] = 2 * math.pi / m * v[m - 2]
        assert geo.volume(geo.Ball(np.zeros(m), 1.0)) == pytest.approx(v[m], rel=1e-13)


def test_membership_conventions():
    assert not geo.contains(geo.Ball([0, 0], 1), [1, 0])
    box = geo.Box([0, 0], [1, 1])
    assert geo.contains(box, [-1, 0])
    assert not geo.contains(box, [1, 0])
    assert geo.contains(geo.IntervalUnion([(0, 1)]), 0.0)
    assert not geo.contains(geo.IntervalUnion([(0, 1)]), 1.0)
    assert geo.contains(geo.IntervalUnion([(0, 1)], closed=True), 1.0)
    assert geo.contains(geo.Box([0], [1], closed=True), [1.0])


def test_dimension_mismatch_raises():
    with pytest.raises(geo.GeometryError):
        geo.contains(geo.Ball([0, 0], 1), [0, 0, 0])


@pytest.mark.parametrize("bad", [
    lambda: geo.Ball([0], 0),
    lambda: geo.Box([0, 0], [1, -1]),
    lambda: geo.IntervalUnion([(0, 1), (0.5, 2)]),
    lambda: geo.IntervalUnion([(1, 1)]),
    lambda: geo.SplitSpace(0, 1),
])
def test_invalid_regions(bad):
    with pytest.raises(geo.GeometryError):
        bad()


def test_split_roundtrip(rng):
    sp = geo.SplitSpace(2, 3)
    v = rng.normal(size=(10, 5))
    assert np.array_equal(sp.join(sp.down(v), sp.left(v)), v)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0.01, 100), r=st.floats(0.1, 5), h=st.floats(0.1, 5), m=st.integers(1, 4))
def test_dilation_scales_volume(t, r, h, m):
    for region in (geo.Ball(np.zeros(m), r), geo.Box(np.ones(m), np.full(m, h))):
        assert geo.volume(geo.dilate(region, t)) == pytest.approx(t**m * geo.volume(region), rel=1e-12)
    iu = geo.IntervalUnion([(0, h), (h + 1, h + 1 + r)])
    assert geo.volume(geo.dilate(iu, t)) == pytest.approx(t * geo.volume(iu), rel=1e-12)


def test_half_open_boxes_tile(rng):
    x = rng.uniform(-5, 5, size=(10_000, 2))
    hits = np.zeros(len(x), dtype=int)
    for i in range(-6, 6):
        for j in range(-6, 6):
            hits += geo.contains(geo.Box([i + 0.5, j + 0.5], [0.5, 0.5]), x)
    assert np.all(hits == 1)
    # integer grid points, where open/closed matters
    g = np.stack(np.meshgrid(np.arange(-3, 3.0), np.arange(-3, 3.0)), -1).reshape(-1, 2)
    hits = sum(geo.contains(geo.Box([i + 0.5, j + 0.5], [0.5, 0.5]), g)
               for i in range(-4, 4) for j in range(-4, 4))
    assert np.all(hits == 1)


def test_minkowski_interval_exact():
    prof = geo.minkowski_profile(geo.IntervalUnion([(-1, 1)]), 1, [0.5, 0.1, 0.01])
    assert [r for _, r, _ in prof.samples] == [4.0, 4.0, 4.0]


def test_minkowski_box_and_ball_outer():
    # outer tube of the square: 8r + pi r^2; of the disk: pi((1+r)^2 - 1)
    box = geo.minkowski_profile(geo.Box([0, 0], [1, 1]), 1, [0.01], side="outer")
    assert box.samples[0][1] == pytest.approx(8 + math.pi * 0.01, rel=1e-12)
    assert box.samples[0][1] == pytest.approx(8, rel=0.01)
    ball = geo.minkowski_profile(geo.Ball([0, 0], 1), 1, [0.001], side="outer")
    assert ball.samples[0][1] == pytest.approx(2 * math.pi, rel=0.01)


def test_minkowski_two_sided_ball():
    r = 0.01
    prof = geo.minkowski_profile(geo.Ball([0, 0], 1), 1, [r])
    assert prof.samples[0][1] == pytest.approx(math.pi * ((1 + r) ** 2 - (1 - r) ** 2) / r, rel=1e-12)


@pytest.mark.parametrize("region,content", [
    (geo.Ball([0, 0], 1), 4 * math.pi),
    (geo.Box([0, 0], [1, 1]), 16),
    (geo.IntervalUnion([(0, 1), (2, 3)]), 8),
])
def test_minkowski_converges(region, content):
    radii = [2.0**-k for k in range(3, 12)]
    vals = [r for _, r, _ in geo.minkowski_profile(region, region.dim - 1 or 1, radii).samples]
    if region.dim == 1:
        vals = [r for _, r, _ in geo.minkowski_profile(region, 1, radii).samples]
    assert abs(vals[-1] - vals[-2]) / vals[-1] < 0.01
    assert vals[-1] == pytest.approx(content, rel=0.01)


def test_minkowski_mc_matches_closed_form():
    box = geo.Box([0, 0], [1, 1])
    mc = geo.minkowski_profile(box, 1, [0.05], mc_samples=200_000, seed=1, method="mc")
    exact = geo.tube_volume(box, 0.05) / 0.05
    r, est, err = mc.samples[0]
    assert abs(est - exact) < 4 * err


def test_minkowski_errors():
    with pytest.raises(geo.GeometryError):
        geo.minkowski_profile(geo.Ball([0], 1), 1, [0.1, 0.2])
    with pytest.raises(geo.GeometryError):
        geo.minkowski_profile(geo.Ball([0, 0], 1), 1, [0.1], method="mc", mc_samples=0)


def test_inflate_deflate_nesting(rng):
    for region in (geo.Ball([0.3, -0.2], 1.0), geo.Box([0, 1], [0.5, 2.0]),
                   geo.IntervalUnion([(0, 0.4), (0.6, 1.0)])):
        a = 0.05
        big, small = geo.inflate(region, a), geo.deflate(region, a)
        x = rng.uniform(-3, 3, size=(5000, region.dim))
        inside = geo.contains(region, x)
        assert np.all(geo.contains(big, x)[inside])
        assert not np.any(geo.contains(small, x) & ~inside)
        # points within a of the region lie in the inflation
        near = geo.boundary_distance(region, x) < a
        assert np.all(geo.contains(big, x)[near & ~inside])


def test_region_json_roundtrip():
    for region in (geo.Ball([0.3, -0.2], 1.0), geo.Box([0, 1], [0.5, 2.0], closed=True),
                   geo.IntervalUnion([(0, 0.4), (0.6, 1.0)])):
        assert geo.region_from_json(geo.region_to_json(region)) == region
    with pytest.raises(geo.GeometryError, match="unknown key"):
        geo.region_from_json({"type": "ball", "center": [0], "radius": 1, "colour": 1})
