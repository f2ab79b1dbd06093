"""Local patterns of cut-and-project sets and their acceptance domains.

A point lambda of the model set with internal coordinate x = lambda* sees the
pattern P(x) = {gamma in Gamma(r) : x + gamma_left in window}: the lattice
differences to its neighbours within distance r. P(x) is constant on cells cut
out by the translates window - gamma_left, which gives exact domains for
interval and box windows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from . import lattice as lat

BOUNDARY_TOL = 1e-9


class PatternError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PatternKey:
    """Sorted integer lattice coordinates of the pattern; contains the origin."""

    vectors: tuple

    def __post_init__(self):
        vecs = tuple(sorted(set(tuple(int(c) for c in v) for v in self.vectors)))
        if not vecs or not any(all(c == 0 for c in v) for v in vecs):
            raise PatternError("a pattern always contains the origin")
        object.__setattr__(self, "vectors", vecs)

    def __len__(self):
        return len(self.vectors)

    def as_lists(self):
        return [list(v) for v in self.vectors]


@dataclass(frozen=True)
class AcceptanceDomain:
    pattern: PatternKey
    region: object  # IntervalUnion, tuple of Box, or None for Monte Carlo estimates
    volume: float
    volume_stderr: float = 0.0


def _window_kind(window):
    if isinstance(window, geo.IntervalUnion):
        return "intervals"
    if isinstance(window, geo.Box):
        return "box"
    if isinstance(window, geo.Ball):
        return "interval-ball" if window.dim == 1 else "ball"
    raise PatternError(f"unsupported window {window!r}")


def _difference_region(window):
    """Region containing window - window (open)."""
    if isinstance(window, geo.Ball):
        return geo.Ball(np.zeros(window.dim), 2 * window.radius)
    lo, hi = geo.bounding_box(window)
    return geo.Box(np.zeros(len(lo)), hi - lo)


def gamma_r(lattice: lat.Lattice, split: geo.SplitSpace, r: float, window) -> lat.LatticePointSet:
    """All gamma with |gamma_down| < r and gamma_left in the window difference set."""
    if not r > 0:
        raise PatternError("r must be positive")
    diff = _difference_region(window)
    region = geo.ProductRegion(geo.Ball(np.zeros(split.d_down), r), diff)
    found = lat.enumerate_in(lattice, region)
    left = split.left(found.points)
    if isinstance(diff, geo.Box):
        keep = np.all(np.abs(left) < np.asarray(diff.halfwidths), axis=1)
    else:
        keep = np.ones(len(left), dtype=bool)
    return lat.LatticePointSet(found.coords[keep], found.points[keep], 0)


def _intervals_of(window):
    if isinstance(window, geo.IntervalUnion):
        return list(window.intervals)
    if isinstance(window, geo.Ball):
        c = window.center[0]
        return [(c - window.radius, c + window.radius)]
    c, h = window.center[0], window.halfwidths[0]
    return [(c - h, c + h)]


def _axis_bounds(window):
    """Per-axis list of (lo, hi) pieces: intervals for d=1, the box sides otherwise."""
    if window.dim == 1:
        return [_intervals_of(window)]
    c, h = np.asarray(window.center), np.asarray(window.halfwidths)
    return [[(c[k] - h[k], c[k] + h[k])] for k in range(window.dim)]


def _axis_cells(pieces, shifts):
    """Cells [x_i, x_{i+1}) of one axis inside the window pieces, and membership."""
    ends = np.array([e for p in pieces for e in p])
    cuts = (ends[None, :] - shifts[:, None]).ravel()
    lo_all, hi_all = pieces[0][0], pieces[-1][1]
    cuts = cuts[(cuts > lo_all) & (cuts < hi_all)]
    grid = np.unique(np.concatenate([cuts, ends]))
    a, b = grid[:-1], grid[1:]
    mid = (a + b) / 2
    inside = np.zeros(len(mid), dtype=bool)
    for lo, hi in pieces:
        inside |= (mid >= lo) & (mid < hi)
    a, b, mid = a[inside], b[inside], mid[inside]
    # member[i, j]: x in cell i has x + shift_j in the window (half-open pieces)
    y = mid[:, None] + shifts[None, :]
    member = np.zeros(y.shape, dtype=bool)
    for lo, hi in pieces:
        member |= (y >= lo) & (y < hi)
    return a, b, member


def _keys_from_rows(member, coords):
    keys = {}
    out = []
    for row in member:
        sig = row.tobytes()
        key = keys.get(sig)
        if key is None:
            key = PatternKey(tuple(map(tuple, coords[row])))
            keys[sig] = key
        out.append(key)
    return out


def acceptance_domains(spec, r: float, clusters: bool = False, mc_samples: int = 200_000,
                       seed=None) -> list:
    """Acceptance domains A_P of all r-patterns, sorted by pattern key.

    clusters=True returns for each admissible P the set {x : P subset of P(x)}
    instead; those overlap and do not tile the window.
    """
    window = spec.window
    kind = _window_kind(window)
    G = gamma_r(spec.lattice, spec.split, r, window)
    coords = np.asarray(G.coords, dtype=np.int64)
    left = spec.split.left(G.points)
    if kind == "ball":
        return _domains_montecarlo(window, coords, left, clusters, mc_samples, seed)
    axes = _axis_bounds(window)
    cells = [_axis_cells(axes[k], left[:, k]) for k in range(window.dim)]
    if window.dim == 1:
        a, b, member = cells[0]
        lows, highs = a[:, None], b[:, None]
    else:
        idx = np.stack(np.meshgrid(*[np.arange(len(c[0])) for c in cells], indexing="ij"), -1)
        idx = idx.reshape(-1, window.dim)
        member = np.ones((len(idx), len(coords)), dtype=bool)
        for k, (_, _, mk) in enumerate(cells):
            member &= mk[idx[:, k]]
        lows = np.stack([cells[k][0][idx[:, k]] for k in range(window.dim)], axis=1)
        highs = np.stack([cells[k][1][idx[:, k]] for k in range(window.dim)], axis=1)
    keys = _keys_from_rows(member, coords)
    vols = np.prod(highs - lows, axis=1)
    groups = {}
    for i, key in enumerate(keys):
        groups.setdefault(key, []).append(i)
    if clusters:
        admissible = sorted(groups)
        sets = [set(k.vectors) for k in keys]
        groups = {P: [i for i, s in enumerate(sets) if set(P.vectors) <= s] for P in admissible}
    out = []
    for key in sorted(groups):
        ids = groups[key]
        vol = math.fsum(vols[ids])
        out.append(AcceptanceDomain(key, _region_from_cells(lows[ids], highs[ids], window), vol))
    return out


def _region_from_cells(lows, highs, window):
    if window.dim == 1:
        order = np.argsort(lows[:, 0])
        ivs = []
        for lo, hi in zip(lows[order, 0], highs[order, 0]):
            if ivs and ivs[-1][1] == lo:
                ivs[-1][1] = hi
            else:
                ivs.append([lo, hi])
        return geo.IntervalUnion(ivs)
    return tuple(geo.Box.from_bounds(lo, hi) for lo, hi in zip(lows, highs))


def _domains_montecarlo(window, coords, left, clusters, n, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    lo, hi = geo.bounding_box(window)
    x = lo + (hi - lo) * rng.random((n, window.dim))
    x = x[geo.contains(window, x)]
    member = np.stack([geo.contains(window, x + g) for g in left], axis=1)
    keys = _keys_from_rows(member, coords)
    vol = geo.volume(window)
    groups = {}
    for i, key in enumerate(keys):
        groups.setdefault(key, []).append(i)
    if clusters:
        sets = [set(k.vectors) for k in keys]
        groups = {P: [i for i, s in enumerate(sets) if set(P.vectors) <= s] for P in sorted(groups)}
    out = []
    m = len(keys)
    for key in sorted(groups):
        p = len(groups[key]) / m
        out.append(AcceptanceDomain(key, None, vol * p, vol * math.sqrt(p * (1 - p) / m)))
    return out


def pattern_frequency(domain: AcceptanceDomain, lattice: lat.Lattice) -> float:
    """Occurrences of the pattern per unit volume of E_down."""
    if domain.volume < 0:
        raise PatternError("negative volume")
    return domain.volume / lattice.covolume


def tiling_defect(domains: Sequence[AcceptanceDomain], window) -> float:
    return abs(math.fsum(d.volume for d in domains) - geo.volume(window))


def classify(spec, r: float, x, gamma: Optional[lat.LatticePointSet] = None):
    """Pattern keys P(x) for internal points x (rows), plus their distance to a cell boundary."""
    window = spec.window
    G = gamma_r(spec.lattice, spec.split, r, window) if gamma is None else gamma
    left = spec.split.left(G.points)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if window.dim == 1 and x.shape[1] != 1:
        x = x.reshape(-1, 1)
    member = np.stack([geo.contains(window, x + g) for g in left], axis=1)
    dist = np.min(np.stack([geo.boundary_distance(window, x + g) for g in left], axis=1), axis=1)
    return _keys_from_rows(member, np.asarray(G.coords, dtype=np.int64)), dist


def geometric_patterns(spec, t: float, r: float, margin: Optional[float] = None):
    """Patterns read off generated points by neighbour search.

    Returns (keys, internal coordinates) for the points of the patch t*search whose
    r-ball lies inside a patch generated with an extra margin r.
    """
    margin = r if margin is None else margin
    big = spec.replace(search=geo.inflate(spec.search, margin / t) if t > 0 else spec.search)
    res = lat.enumerate_in(big.lattice, big.region(t), -spec.shift_vector)
    pts = spec.split.down(res.points - spec.shift_vector)
    inner = geo.contains(geo.dilate(spec.search, t), pts)
    tree = cKDTree(pts)
    idx = np.flatnonzero(inner)
    nbrs = tree.query_ball_point(pts[idx], r)
    keys = []
    for i, nb in zip(idx, nbrs):
        nb = np.asarray(nb, dtype=np.int64)
        d = np.linalg.norm(pts[nb] - pts[i], axis=1)
        nb = nb[d < r]
        keys.append(PatternKey(tuple(map(tuple, res.coords[nb] - res.coords[i]))))
    internal = spec.split.left(res.points[idx] - spec.shift_vector)
    return keys, internal


@dataclass(frozen=True)
class ConsistencyReport:
    checked: int
    agreed: int
    skipped_boundary: int

    @property
    def rate(self) -> float:
        return self.agreed / self.checked if self.checked else float("nan")


def pattern_consistency(spec, r: float, t: float, n_points: int = 1000, seed=None) -> ConsistencyReport:
    """Compare neighbour-search patterns with the domain classification of lambda*."""
    keys, internal = geometric_patterns(spec, t, r)
    if not keys:
        raise PatternError("no interior points; increase t")
    rng = np.random.Generator(np.random.Philox(seed))
    pick = rng.choice(len(keys), size=min(n_points, len(keys)), replace=False)
    pred, dist = classify(spec, r, internal[pick])
    checked = agreed = skipped = 0
    for j, i in enumerate(pick):
        if dist[j] <= BOUNDARY_TOL:
            skipped += 1
            continue
        checked += 1
        agreed += pred[j] == keys[i]
    return ConsistencyReport(checked, agreed, skipped)


def empirical_frequencies(spec, t: float, r: float) -> dict:
    """Pattern counts per unit volume in the patch t*search."""
    keys, _ = geometric_patterns(spec, t, r)
    vol = geo.volume(spec.search) * t ** spec.split.d_down
    out = {}
    for k in keys:
        out[k] = out.get(k, 0) + 1
    return {k: v / vol for k, v in out.items()}


def complexity(spec, r_grid: Sequence[float]) -> list:
    """Number of admissible r-patterns for each r."""
    r_grid = [float(r) for r in r_grid]
    if any(b <= a for a, b in zip(r_grid, r_grid[1:])):
        raise PatternError("r_grid must be increasing")
    return [(r, len(acceptance_domains(spec, r))) for r in r_grid]
