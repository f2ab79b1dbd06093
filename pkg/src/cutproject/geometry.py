"""Split spaces, regions, volumes, membership and Minkowski profiles.

Three region variants are supported: open balls, half-open boxes
(lower-closed, upper-open per coordinate) and 1-D unions of half-open
intervals.  Boxes and interval unions can be flagged ``closed`` which
makes every upper face inclusive as well; this is only used for search
regions written as closed intervals such as ``[0, 1]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence, Union

import numpy as np


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpace:
    """E = E_down (+) E_left, coordinates ordered down first."""

    d_down: int
    d_left: int

    def __post_init__(self):
        if int(self.d_down) < 1 or int(self.d_left) < 1:
            raise GeometryError("d_down and d_left must be >= 1")

    @property
    def d(self) -> int:
        return self.d_down + self.d_left

    def down(self, v):
        return np.asarray(v, dtype=float)[..., : self.d_down]

    def left(self, v):
        return np.asarray(v, dtype=float)[..., self.d_down :]

    def join(self, down, left):
        return np.concatenate([np.atleast_1d(down), np.atleast_1d(left)], axis=-1)


def _tuple(v) -> tuple:
    return tuple(float(x) for x in np.atleast_1d(np.asarray(v, dtype=float)))


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _tuple(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise GeometryError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)


@dataclass(frozen=True)
class Box:
    center: tuple
    halfwidths: tuple
    closed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "center", _tuple(self.center))
        object.__setattr__(self, "halfwidths", _tuple(self.halfwidths))
        if len(self.center) != len(self.halfwidths):
            raise GeometryError("box center and halfwidths differ in length")
        if not all(h > 0 for h in self.halfwidths):
            raise GeometryError("box halfwidths must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @classmethod
    def from_bounds(cls, lo, hi, closed=False):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return cls((lo + hi) / 2, (hi - lo) / 2, closed)


@dataclass(frozen=True)
class IntervalUnion:
    intervals: tuple
    closed: bool = False

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        if not ivs:
            raise GeometryError("interval union needs at least one interval")
        for a, b in ivs:
            if not b > a:
                raise GeometryError(f"empty interval [{a}, {b})")
        for (a0, b0), (a1, b1) in zip(ivs, ivs[1:]):
            if a1 < b0:
                raise GeometryError("intervals must be sorted and disjoint")
        object.__setattr__(self, "intervals", ivs)

    @property
    def dim(self) -> int:
        return 1

    def components(self):
        """Intervals with touching neighbours merged."""
        out = [list(self.intervals[0])]
        for a, b in self.intervals[1:]:
            if a == out[-1][1]:
                out[-1][1] = b
            else:
                out.append([a, b])
        return [tuple(c) for c in out]


Region = Union[Ball, Box, IntervalUnion]


@dataclass(frozen=True)
class ProductRegion:
    """Product region down x left inside E."""

    down: Region
    left: Region

    @property
    def dim(self) -> int:
        return self.down.dim + self.left.dim

    @property
    def split(self) -> SplitSpace:
        return SplitSpace(self.down.dim, self.left.dim)


@dataclass(frozen=True)
class MinkowskiProfile:
    s: float
    samples: tuple = field(default_factory=tuple)  # (r, ratio, stderr)
    method: str = "exact"


def unit_ball_volume(m: int) -> float:
    return math.pi ** (m / 2) / math.gamma(m / 2 + 1)


def volume(region) -> float:
    if isinstance(region, Ball):
        return unit_ball_volume(region.dim) * region.radius ** region.dim
    if isinstance(region, Box):
        return float(np.prod(2 * np.asarray(region.halfwidths)))
    if isinstance(region, IntervalUnion):
        return float(sum(b - a for a, b in region.intervals))
    if isinstance(region, ProductRegion):
        return volume(region.down) * volume(region.left)
    raise GeometryError(f"unknown region {region!r}")


def _points(region, x):
    x = np.asarray(x, dtype=float)
    m = region.dim
    if x.ndim == 0:
        if m != 1:
            raise GeometryError("dimension mismatch")
        x = x.reshape(1)
    if x.shape[-1] != m:
        raise GeometryError(f"dimension mismatch: point has {x.shape[-1]} coords, region {m}")
    return x


def contains(region, x):
    """Membership; accepts one point or an (..., m) array of points."""
    if isinstance(region, ProductRegion):
        x = _points(region, x)
        k = region.down.dim
        return contains(region.down, x[..., :k]) & contains(region.left, x[..., k:])
    x = _points(region, x)
    if isinstance(region, Ball):
        c = np.asarray(region.center)
        out = np.sum((x - c) ** 2, axis=-1) < region.radius**2
    elif isinstance(region, Box):
        c = np.asarray(region.center)
        h = np.asarray(region.halfwidths)
        lo, hi = c - h, c + h
        upper = (x <= hi) if region.closed else (x < hi)
        out = np.all((x >= lo) & upper, axis=-1)
    elif isinstance(region, IntervalUnion):
        y = x[..., 0]
        out = np.zeros(y.shape, dtype=bool)
        for a, b in region.intervals:
            out |= (y >= a) & ((y <= b) if region.closed else (y < b))
    else:
        raise GeometryError(f"unknown region {region!r}")
    return out if out.ndim else bool(out)


def bounding_box(region):
    """(lo, hi) arrays of a closed box containing the region."""
    if isinstance(region, ProductRegion):
        l0, h0 = bounding_box(region.down)
        l1, h1 = bounding_box(region.left)
        return np.concatenate([l0, l1]), np.concatenate([h0, h1])
    if isinstance(region, Ball):
        c = np.asarray(region.center)
        return c - region.radius, c + region.radius
    if isinstance(region, Box):
        c = np.asarray(region.center)
        h = np.asarray(region.halfwidths)
        return c - h, c + h
    if isinstance(region, IntervalUnion):
        return np.array([region.intervals[0][0]]), np.array([region.intervals[-1][1]])
    raise GeometryError(f"unknown region {region!r}")


def dilate(region, t: float):
    """Image of the region under x -> t x."""
    t = float(t)
    if not t > 0:
        raise GeometryError("dilation factor must be positive")
    if isinstance(region, Ball):
        return Ball(np.asarray(region.center) * t, region.radius * t)
    if isinstance(region, Box):
        return Box(np.asarray(region.center) * t, np.asarray(region.halfwidths) * t, region.closed)
    if isinstance(region, IntervalUnion):
        return IntervalUnion([(a * t, b * t) for a, b in region.intervals], region.closed)
    raise GeometryError(f"unknown region {region!r}")


def translate(region, v):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if isinstance(region, Ball):
        return Ball(np.asarray(region.center) + v, region.radius)
    if isinstance(region, Box):
        return Box(np.asarray(region.center) + v, region.halfwidths, region.closed)
    if isinstance(region, IntervalUnion):
        return IntervalUnion([(a + v[0], b + v[0]) for a, b in region.intervals], region.closed)
    raise GeometryError(f"unknown region {region!r}")


def circumradius(region) -> float:
    """sup |x| over the region (about the origin, not the center)."""
    if isinstance(region, Ball):
        return float(np.linalg.norm(region.center) + region.radius)
    lo, hi = bounding_box(region)
    return float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))


def diameter(region) -> float:
    if isinstance(region, Ball):
        return 2 * region.radius
    if isinstance(region, Box):
        return float(2 * np.linalg.norm(region.halfwidths))
    lo, hi = bounding_box(region)
    return float(np.linalg.norm(hi - lo))


def boundary_distance(region, x):
    """Euclidean distance from x to the boundary of the region."""
    x = _points(region, x)
    if isinstance(region, Ball):
        r = np.sqrt(np.sum((x - np.asarray(region.center)) ** 2, axis=-1))
        return np.abs(r - region.radius)
    if isinstance(region, Box):
        q = np.abs(x - np.asarray(region.center)) - np.asarray(region.halfwidths)
        outside = np.sqrt(np.sum(np.maximum(q, 0) ** 2, axis=-1))
        inside = -np.max(q, axis=-1)
        return np.where(np.all(q < 0, axis=-1), inside, outside)
    if isinstance(region, IntervalUnion):
        ends = np.array([e for c in region.components() for e in c])
        return np.min(np.abs(x[..., :1] - ends), axis=-1)
    if isinstance(region, ProductRegion):
        k = region.down.dim
        d0 = boundary_distance(region.down, x[..., :k])
        d1 = boundary_distance(region.left, x[..., k:])
        in0 = contains(region.down, x[..., :k])
        in1 = contains(region.left, x[..., k:])
        # distance to the boundary of a product, lower bound that is exact
        # whenever the point is inside either factor
        return np.where(in0 & in1, np.minimum(d0, d1),
                        np.where(in0, d1, np.where(in1, d0, np.hypot(d0, d1))))
    raise GeometryError(f"unknown region {region!r}")


def decay_order(region, s: float | None = None) -> float:
    """Fourier decay order of the indicator: (m+1)/2 for balls, 1 otherwise."""
    if s is not None:
        return float(s)
    if isinstance(region, Ball):
        return (region.dim + 1) / 2
    return 1.0


# -- set approximations used by the smoothing machinery ----------------------

def inflate(region, a: float):
    """A region containing region + B(0, a)."""
    if a <= 0:
        return region
    if isinstance(region, Ball):
        return Ball(region.center, region.radius + a)
    if isinstance(region, Box):
        # in dim >= 2 the rounded box is replaced by its enclosing box
        return Box(region.center, np.asarray(region.halfwidths) + a, region.closed)
    if isinstance(region, IntervalUnion):
        merged = []
        for lo, hi in region.components():
            lo, hi = lo - a, hi + a
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return IntervalUnion(merged, region.closed)
    raise GeometryError(f"unknown region {region!r}")


def deflate(region, a: float):
    """Points at distance >= a from the complement, or None if empty."""
    if a <= 0:
        return region
    if isinstance(region, Ball):
        return Ball(region.center, region.radius - a) if region.radius > a else None
    if isinstance(region, Box):
        h = np.asarray(region.halfwidths) - a
        return Box(region.center, h, region.closed) if np.all(h > 0) else None
    if isinstance(region, IntervalUnion):
        keep = [(lo + a, hi - a) for lo, hi in region.components() if hi - lo > 2 * a]
        return IntervalUnion(keep, region.closed) if keep else None
    raise GeometryError(f"unknown region {region!r}")


# -- Minkowski content ------------------------------------------------------

def _elementary_symmetric(xs, k):
    return sum(math.prod(c) for c in combinations(xs, k)) if k else 1.0


def _outer_parallel_volume(region, r):
    if isinstance(region, Ball):
        return unit_ball_volume(region.dim) * (region.radius + r) ** region.dim
    if isinstance(region, Box):
        sides = [2 * h for h in region.halfwidths]
        m = len(sides)
        return sum(_elementary_symmetric(sides, j) * unit_ball_volume(m - j) * r ** (m - j)
                   for j in range(m + 1))
    raise GeometryError("no closed form")


def _inner_parallel_volume(region, r):
    inner = deflate(region, r)
    return 0.0 if inner is None else volume(inner)


def tube_volume(region, r: float, side: str = "both") -> float:
    """Closed-form volume of the r-neighbourhood of the boundary.

    ``side="both"`` is the full neighbourhood of the boundary,
    ``side="outer"`` only its part outside the region.
    """
    if isinstance(region, IntervalUnion) or region.dim == 1:
        if not isinstance(region, IntervalUnion):
            lo, hi = bounding_box(region)
            region = IntervalUnion([(lo[0], hi[0])])
        comps = region.components()
        if side == "outer":
            return volume(inflate(region, r)) - volume(region)
        ends = sorted(e for c in comps for e in c)
        # union of [e - r, e + r]: r * (2 + sum min(gap / r, 2)), exact for separated ends
        units = 2.0 + sum(min((b - a) / r, 2.0) for a, b in zip(ends, ends[1:]))
        return r * units
    outer = _outer_parallel_volume(region, r)
    if side == "outer":
        return outer - volume(region)
    return outer - _inner_parallel_volume(region, r)


def minkowski_profile(region, s: float, radii: Sequence[float], mc_samples: int = 0,
                      seed=None, method: str = "exact", side: str = "both") -> MinkowskiProfile:
    """Ratios vol((boundary)_r) / r^s for a decreasing list of radii."""
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise GeometryError("radii must be positive and strictly decreasing")
    if not 0 < s <= region.dim:
        raise GeometryError("s must lie in (0, dim]")
    samples = []
    if method == "exact":
        for r in radii:
            samples.append((r, tube_volume(region, r, side) / r**s, 0.0))
        return MinkowskiProfile(float(s), tuple(samples), "exact")
    if method != "mc":
        raise GeometryError(f"unknown method {method!r}")
    if mc_samples <= 0:
        raise GeometryError("mc_samples must be positive for Monte Carlo estimation")
    rng = np.random.Generator(np.random.Philox(seed))
    lo, hi = bounding_box(region)
    for r in radii:
        blo, bhi = lo - r, hi + r
        box_vol = float(np.prod(bhi - blo))
        x = blo + (bhi - blo) * rng.random((mc_samples, region.dim))
        hit = boundary_distance(region, x) < r
        if side == "outer":
            hit &= ~contains(region, x)
        p = hit.mean()
        err = box_vol * math.sqrt(p * (1 - p) / mc_samples)
        samples.append((r, box_vol * p / r**s, err / r**s))
    return MinkowskiProfile(float(s), tuple(samples), "mc")


# -- serialization ----------------------------------------------------------

def region_from_json(obj: dict):
    if not isinstance(obj, dict) or "type" not in obj:
        raise GeometryError("region must be an object with a 'type' key")
    kind = obj["type"]
    allowed = {"ball": {"type", "center", "radius"},
               "box": {"type", "center", "halfwidths", "closed"},
               "intervals": {"type", "intervals", "closed"}}
    if kind not in allowed:
        raise GeometryError(f"unknown region type {kind!r}")
    extra = set(obj) - allowed[kind]
    if extra:
        raise GeometryError(f"unknown key(s) {sorted(extra)}")
    try:
        if kind == "ball":
            return Ball(obj["center"], obj["radius"])
        if kind == "box":
            return Box(obj["center"], obj["halfwidths"], bool(obj.get("closed", False)))
        return IntervalUnion(obj["intervals"], bool(obj.get("closed", False)))
    except KeyError as exc:
        raise GeometryError(f"missing key {exc.args[0]!r}") from None


def region_to_json(region) -> dict:
    if isinstance(region, Ball):
        return {"type": "ball", "center": list(region.center), "radius": region.radius}
    if isinstance(region, Box):
        out = {"type": "box", "center": list(region.center), "halfwidths": list(region.halfwidths)}
    elif isinstance(region, IntervalUnion):
        out = {"type": "intervals", "intervals": [list(iv) for iv in region.intervals]}
    else:
        raise GeometryError(f"unknown region {region!r}")
    if region.closed:
        out["closed"] = True
    return out
