"""Density fluctuation checks for biLipschitz equivalence to a lattice.

zeta_alpha(C) compares the count in a cube C with alpha*vol(C) through
max(ratio, 1/ratio). Z_alpha(t) is its sup over integer translates of the cube
[0, t)^d; summability of log Z_alpha(2^n) is the sufficient criterion.
The sup runs over a finite translate range only, so every Z value reported
here is a lower bound.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry as geo
from . import lattice as lat
from .modelset import ModelSetSpec

# increments staying above this over the last few scales count as divergence
DIVERGENCE_FLOOR = 0.05
DIVERGENCE_RUN = 3


class BLError(ValueError):
    pass


def integer_lattice_spec(d_down: int) -> ModelSetSpec:
    """Z^d as a cut-and-project set: Z^(d+1) with window [0, 1)."""
    split = geo.SplitSpace(d_down, 1)
    return ModelSetSpec(split, lat.identity(d_down + 1), None,
                        geo.IntervalUnion([(0.0, 1.0)]), geo.Box(np.zeros(d_down), np.ones(d_down)))


def _zeta(count, expected):
    if count == 0:
        return math.inf
    r = count / expected
    return max(r, 1 / r)


def zeta_alpha(points, alpha: float, cube: geo.Box) -> float:
    """max(alpha vol / #, # / (alpha vol)) for the half-open cube; inf if it holds no point."""
    if not alpha > 0:
        raise BLError("alpha must be positive")
    if not isinstance(cube, geo.Box):
        raise BLError("cube must be a Box")
    expected = alpha * geo.volume(cube)
    if isinstance(points, ModelSetSpec):
        spec = points
        region = geo.ProductRegion(geo.Box(cube.center, cube.halfwidths), spec.window)
        n = lat.count_in(spec.lattice, region, -spec.shift_vector)
    else:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = int(np.sum(geo.contains(geo.Box(cube.center, cube.halfwidths), pts)))
    return _zeta(n, expected)


@dataclass(frozen=True)
class ZEstimate:
    value: float
    argmax: tuple
    translates_scanned: int
    saturated: bool  # same max over the half range
    empty_cubes: int
    lower_bound: bool = True

    def __iter__(self):
        return iter((self.value, self.argmax))


def _translates(d, R):
    rng = np.arange(-R, R + 1)
    grid = np.stack(np.meshgrid(*([rng] * d), indexing="ij"), -1)
    return grid.reshape(-1, d)  # lexicographic order


def _chain_counts(spec, t, R):
    """Counts in [n, n+t) for n = -R..R when d_down = 1, via one sorted point list."""
    lo = np.array([-R - 1.0])
    hi = np.array([R + t + 1.0])
    region = geo.ProductRegion(geo.Box.from_bounds(lo, hi), spec.window)
    res = lat.enumerate_in(spec.lattice, region, -spec.shift_vector)
    y = np.sort(spec.split.down(res.points - spec.shift_vector)[:, 0])
    n = np.arange(-R, R + 1, dtype=float)
    return np.searchsorted(y, n + t, side="left") - np.searchsorted(y, n, side="left")


def _cube_counts(spec, t, translates):
    d = spec.split.d_down
    cube = geo.Box(np.full(d, t / 2), np.full(d, t / 2))
    region = geo.ProductRegion(cube, spec.window)
    full = spec.split.join(translates.astype(float), np.zeros((len(translates), spec.split.d_left)))
    return lat.count_in_many(spec.lattice, region, -(spec.shift_vector[None, :] + full))


def z_alpha_estimate(spec: ModelSetSpec, alpha: float, t: float, translate_range: int) -> ZEstimate:
    """Max of zeta_alpha over n + [0, t)^d with |n|_inf <= translate_range."""
    if translate_range < 1:
        raise BLError("translate_range must be >= 1")
    if not alpha > 0 or not t > 0:
        raise BLError("alpha and t must be positive")
    d = spec.split.d_down
    R = int(translate_range)
    translates = _translates(d, R)
    if d == 1:
        counts = _chain_counts(spec, t, R)
    else:
        counts = _cube_counts(spec, t, translates)
    expected = alpha * t**d
    with np.errstate(divide="ignore"):
        ratio = counts / expected
        zeta = np.where(counts > 0, np.maximum(ratio, 1 / ratio), np.inf)
    k = int(np.argmax(zeta))
    half = np.all(np.abs(translates) <= R // 2, axis=1)
    saturated = bool(np.max(zeta[half]) == zeta[k]) if R >= 2 else False
    return ZEstimate(float(zeta[k]), tuple(int(v) for v in translates[k]), len(translates),
                     saturated, int(np.sum(counts == 0)))


@dataclass
class BLReport:
    alpha: float
    rows: list = field(default_factory=list)  # (n, t, Z, translates_scanned, argmax)
    partial_sums: list = field(default_factory=list)
    saturated: list = field(default_factory=list)

    @property
    def increments(self) -> list:
        return [math.log(r[2]) for r in self.rows]

    @property
    def last_increment(self) -> float:
        return self.increments[-1]

    @property
    def diverging(self) -> bool:
        """Increments that stay bounded away from zero over the last scales."""
        inc = self.increments[-DIVERGENCE_RUN:]
        return min(inc) >= DIVERGENCE_FLOOR

    def csv_rows(self):
        for row, s in zip(self.rows, self.partial_sums):
            n, t, z, _, arg = row
            yield (n, t, z, math.log(z), s, " ".join(map(str, arg)))


def dyadic_log_sum(spec: ModelSetSpec, alpha: Optional[float] = None, n_max: int = 10,
                   translate_range: int = 1000) -> BLReport:
    """Partial sums of log Z_alpha(2^n), n = 1..n_max."""
    if n_max < 3:
        raise BLError("n_max must be >= 3")
    alpha = spec.density if alpha is None else float(alpha)
    rep = BLReport(alpha)
    total = 0.0
    for n in range(1, n_max + 1):
        t = 2.0**n
        z = z_alpha_estimate(spec, alpha, t, translate_range)
        rep.rows.append((n, t, z.value, z.translates_scanned, z.argmax))
        total += math.log(z.value)
        rep.partial_sums.append(total)
        rep.saturated.append(z.saturated)
    return rep
