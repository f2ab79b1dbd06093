"""Full-rank lattices: covolume, dual, enumeration, counting and reduction.

Enumeration works slab by slab.  One integer coordinate (the pivot) is
solved for along each line of the remaining coordinates, so the work is
proportional to the number of lines rather than to the volume of the
integer bounding box.  ``count_in`` goes one step further and counts the
integers in each line/region intersection without materializing points;
only the few candidates next to the ends of each intersection are tested
with the exact membership rule, so both routes agree bit for bit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import geometry as geo

GOLDEN = (1 + math.sqrt(5)) / 2
GOLDEN_BAR = (1 - math.sqrt(5)) / 2
BOUNDARY_EPS = 1e-9
MAX_ROWS_PER_CHUNK = 1 << 16


class LatticeError(ValueError):
    pass


class BudgetError(RuntimeError):
    """Raised when a computation would exceed its resource budget."""


class Lattice:
    """Lattice spanned by the columns of ``basis``."""

    def __init__(self, basis, exact_tag=None):
        b = np.array(basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise LatticeError("basis must be a square matrix")
        det = np.linalg.det(b)
        if not np.isfinite(det) or abs(det) < 1e-300:
            raise LatticeError("singular basis")
        b.setflags(write=False)
        self.basis = b
        self.exact_tag = exact_tag
        self._inv = np.linalg.inv(b)
        self._inv.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def covolume(self) -> float:
        return float(abs(np.linalg.det(self.basis)))

    @property
    def inverse(self):
        return self._inv

    def points_from_coords(self, coords):
        """basis @ coords with a fixed summation order (shape independent)."""
        k = np.asarray(coords)
        x = k[..., 0, None] * self.basis[:, 0]
        for j in range(1, self.dim):
            x = x + k[..., j, None] * self.basis[:, j]
        return x

    def coords_of(self, x):
        return np.asarray(x, dtype=float) @ self._inv.T

    def cell_diameter(self) -> float:
        """Diameter of the fundamental parallelotope."""
        best = 0.0
        for signs in itertools.product((0, 1), repeat=self.dim):
            best = max(best, float(np.linalg.norm(self.basis @ np.array(signs, float))))
        for signs in itertools.product((-1, 1), repeat=self.dim):
            best = max(best, float(np.linalg.norm(self.basis @ np.array(signs, float))))
        return best

    def __repr__(self):
        tag = f", exact_tag={self.exact_tag!r}" if self.exact_tag is not None else ""
        return f"Lattice({self.basis.tolist()}{tag})"


@dataclass(frozen=True)
class LatticePoint:
    coords: tuple
    point: tuple


@dataclass
class LatticePointSet:
    """Enumeration result in lexicographic coordinate order."""

    coords: np.ndarray
    points: np.ndarray
    boundary_warnings: int = 0

    def __len__(self):
        return len(self.coords)

    def __iter__(self) -> Iterator[LatticePoint]:
        for k, x in zip(self.coords, self.points):
            yield LatticePoint(tuple(int(v) for v in k), tuple(float(v) for v in x))


def identity(d: int) -> Lattice:
    return Lattice(np.eye(d))


def golden() -> Lattice:
    """{(n + m phi, n + m phibar)}, covolume sqrt(5)."""
    return Lattice([[1.0, GOLDEN], [1.0, GOLDEN_BAR]], exact_tag="golden")


def dual(lattice: Lattice) -> Lattice:
    tag = None
    if lattice.exact_tag is not None:
        tag = ("dual", lattice.exact_tag)
    return Lattice(np.linalg.inv(lattice.basis).T, exact_tag=tag)


def direct_sum(a: Lattice, b: Lattice) -> Lattice:
    d = a.dim + b.dim
    m = np.zeros((d, d))
    m[: a.dim, : a.dim] = a.basis
    m[a.dim :, a.dim :] = b.basis
    return Lattice(m)


def lll_reduce(basis, delta: float = 0.75, max_iter: int = 10_000):
    """LLL reduction of the columns of basis; returns (reduced, U) with reduced = basis @ U."""
    b = np.array(basis, dtype=float)
    n = b.shape[1]
    U = np.eye(n, dtype=np.int64)

    def gram_schmidt(b):
        q = np.zeros_like(b)
        mu = np.zeros((n, n))
        for i in range(n):
            v = b[:, i].copy()
            for j in range(i):
                mu[i, j] = b[:, i] @ q[:, j] / (q[:, j] @ q[:, j])
                v -= mu[i, j] * q[:, j]
            q[:, i] = v
        return q, mu

    q, mu = gram_schmidt(b)
    k, it = 1, 0
    while k < n:
        it += 1
        if it > max_iter:
            raise LatticeError("LLL did not converge")
        for j in range(k - 1, -1, -1):
            c = round(mu[k, j])
            if c:
                b[:, k] -= c * b[:, j]
                U[:, k] -= c * U[:, j]
                q, mu = gram_schmidt(b)
        if q[:, k] @ q[:, k] >= (delta - mu[k, k - 1] ** 2) * (q[:, k - 1] @ q[:, k - 1]):
            k += 1
        else:
            b[:, [k - 1, k]] = b[:, [k, k - 1]]
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            q, mu = gram_schmidt(b)
            k = max(k - 1, 1)
    return b, U


# -- enumeration ---------------------------------------------------------------

def _coordinate_ranges(lattice, lo, hi):
    """Integer coordinate ranges covering the box [lo, hi]."""
    c = (lo + hi) / 2
    w = (hi - lo) / 2
    kc = lattice.inverse @ c
    spread = np.abs(lattice.inverse) @ w
    kmin = np.floor(kc - spread).astype(np.int64) - 1
    kmax = np.ceil(kc + spread).astype(np.int64) + 1
    return kmin, kmax, spread


def _outer_rows(kmin, kmax, pivot):
    """Lexicographic grid over all coordinates except the pivot, in chunks."""
    others = [i for i in range(len(kmin)) if i != pivot]
    if not others:
        yield np.zeros((1, 0), dtype=np.int64)
        return
    sizes = [int(kmax[i] - kmin[i] + 1) for i in others]
    total = math.prod(sizes)
    for start in range(0, total, MAX_ROWS_PER_CHUNK):
        idx = np.arange(start, min(total, start + MAX_ROWS_PER_CHUNK), dtype=np.int64)
        cols = np.empty((len(idx), len(others)), dtype=np.int64)
        for j in range(len(others) - 1, -1, -1):
            cols[:, j] = idx % sizes[j] + kmin[others[j]]
            idx = idx // sizes[j]
        yield cols


def _full_coords(rows, pivot_vals, pivot, d):
    out = np.empty((len(rows), d), dtype=np.int64)
    others = [i for i in range(d) if i != pivot]
    out[:, others] = rows
    out[:, pivot] = pivot_vals
    return out


def _row_base(lattice, rows, pivot):
    others = [i for i in range(lattice.dim) if i != pivot]
    if not others:
        return np.zeros((len(rows), lattice.dim))
    x = rows[:, 0, None] * lattice.basis[:, others[0]]
    for j, i in enumerate(others[1:], start=1):
        x = x + rows[:, j, None] * lattice.basis[:, i]
    return x


def _check_bounded(region):
    lo, hi = geo.bounding_box(region)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise LatticeError("region unbounded")
    return lo, hi


def iter_enumerate(lattice: Lattice, region, shift=None, max_points: float = np.inf):
    """Yield (coords, points) chunks of all gamma with gamma + shift in region."""
    d = lattice.dim
    if region.dim != d:
        raise LatticeError(f"region dimension {region.dim} != lattice dimension {d}")
    shift = np.zeros(d) if shift is None else np.asarray(shift, dtype=float).reshape(d)
    lo, hi = _check_bounded(region)
    lo, hi = lo - shift, hi - shift
    kmin, kmax, spread = _coordinate_ranges(lattice, lo, hi)
    pivot = int(np.argmax(kmax - kmin))
    bp = lattice.basis[:, pivot]
    active = np.abs(bp) > 0
    produced = 0
    for rows in _outer_rows(kmin, kmax, pivot):
        base = _row_base(lattice, rows, pivot)
        kl = np.full(len(rows), float(kmin[pivot]))
        ku = np.full(len(rows), float(kmax[pivot]))
        for i in np.flatnonzero(active):
            a = (lo[i] - base[:, i]) / bp[i]
            b = (hi[i] - base[:, i]) / bp[i]
            kl = np.maximum(kl, np.minimum(a, b))
            ku = np.minimum(ku, np.maximum(a, b))
        first = np.floor(kl).astype(np.int64) - 1
        last = np.ceil(ku).astype(np.int64) + 1
        first = np.maximum(first, kmin[pivot])
        last = np.minimum(last, kmax[pivot])
        n = np.maximum(last - first + 1, 0)
        total = int(n.sum())
        if total == 0:
            continue
        produced += total
        if produced > max_points:
            raise BudgetError(f"enumeration exceeds budget of {max_points:g} candidates")
        row_idx = np.repeat(np.arange(len(rows)), n)
        offsets = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
        piv = first[row_idx] + offsets
        coords = _full_coords(rows[row_idx], piv, pivot, d)
        pts = lattice.points_from_coords(coords)
        keep = geo.contains(region, pts + shift)
        if np.any(keep):
            yield coords[keep], pts[keep]


def enumerate_in(lattice: Lattice, region, shift=None, max_points: float = np.inf) -> LatticePointSet:
    """All gamma in the lattice with gamma + shift inside region."""
    d = lattice.dim
    chunks = list(iter_enumerate(lattice, region, shift, max_points))
    if chunks:
        coords = np.concatenate([c for c, _ in chunks])
        pts = np.concatenate([p for _, p in chunks])
        order = np.lexsort(coords.T[::-1])
        coords, pts = coords[order], pts[order]
    else:
        coords = np.zeros((0, d), dtype=np.int64)
        pts = np.zeros((0, d))
    shift_v = np.zeros(d) if shift is None else np.asarray(shift, dtype=float).reshape(d)
    warn = 0
    if len(pts):
        warn = int(np.sum(geo.boundary_distance(region, pts + shift_v) < BOUNDARY_EPS))
    return LatticePointSet(coords, pts, warn)


# -- fast counting ---------------------------------------------------------------

def _factor_blocks(region):
    """List of (offset, factor) covering the coordinates of the region."""
    if isinstance(region, geo.ProductRegion):
        return [(0, region.down), (region.down.dim, region.left)]
    return [(0, region)]


def _factor_intervals(factor, off, base, bp):
    """Allowed pivot values along each line, as a list of (lo, hi) arrays.

    base has shape (..., d); the returned bounds have shape base.shape[:-1].
    Bounds are real numbers; boundary conventions are settled later by
    explicit membership tests, so openness is not tracked here.
    """
    shape = base.shape[:-1]
    m = factor.dim
    xb = base[..., off : off + m]
    b = bp[off : off + m]
    inf = np.full(shape, np.inf)
    if isinstance(factor, geo.Ball):
        c = np.asarray(factor.center)
        v = xb - c
        A = float(b @ b)
        C = np.sum(v * v, axis=-1) - factor.radius**2
        if A == 0:
            ok = np.sum(v * v, axis=-1) < factor.radius**2
            return [(np.where(ok, -inf, inf), np.where(ok, inf, -inf))]
        B = v @ b
        disc = B * B - A * C
        sq = np.sqrt(np.maximum(disc, 0))
        lo = np.where(disc > 0, (-B - sq) / A, inf)
        hi = np.where(disc > 0, (-B + sq) / A, -inf)
        return [(lo, hi)]
    if isinstance(factor, geo.Box):
        c = np.asarray(factor.center)
        h = np.asarray(factor.halfwidths)
        boxes = [(c - h, c + h)]
    elif isinstance(factor, geo.IntervalUnion):
        comps = factor.components() if factor.closed else factor.intervals
        boxes = [(np.array([a]), np.array([bb])) for a, bb in comps]
    else:
        raise LatticeError(f"unsupported factor {factor!r}")
    out = []
    for blo, bhi in boxes:
        lo = -inf.copy()
        hi = inf.copy()
        for i in range(m):
            if b[i] == 0:
                upper = xb[..., i] <= bhi[i] if factor.closed else xb[..., i] < bhi[i]
                ok = (xb[..., i] >= blo[i]) & upper
                lo = np.where(ok, lo, np.inf)
                hi = np.where(ok, hi, -np.inf)
                continue
            p = (blo[i] - xb[..., i]) / b[i]
            q = (bhi[i] - xb[..., i]) / b[i]
            lo = np.maximum(lo, np.minimum(p, q))
            hi = np.minimum(hi, np.maximum(p, q))
        out.append((lo, hi))
    return out


def count_in_many(lattice: Lattice, region, shifts, chunk_elems: int = 4_000_000) -> np.ndarray:
    """Counts #{gamma : gamma + s in region} for every row s of ``shifts``.

    Agrees exactly with ``len(enumerate_in(lattice, region, s))``.
    """
    d = lattice.dim
    shifts = np.atleast_2d(np.asarray(shifts, dtype=float))
    if shifts.shape[1] != d:
        raise LatticeError("shift dimension mismatch")
    lo, hi = _check_bounded(region)
    glo = lo - shifts.max(axis=0)
    ghi = hi - shifts.min(axis=0)
    kmin, kmax, _ = _coordinate_ranges(lattice, glo, ghi)
    pivot = int(np.argmax(kmax - kmin))
    bp = lattice.basis[:, pivot]
    blocks = _factor_blocks(region)
    counts = np.zeros(len(shifts), dtype=np.int64)
    for rows in _outer_rows(kmin, kmax, pivot):
        rbase = _row_base(lattice, rows, pivot)
        step = max(1, chunk_elems // max(1, len(rows) * d))
        for s0 in range(0, len(shifts), step):
            sh = shifts[s0 : s0 + step]
            base = rbase[None, :, :] + sh[:, None, :]
            per_factor = [_factor_intervals(f, off, base, bp) for off, f in blocks]
            kl0 = float(kmin[pivot]) - 1
            ku0 = float(kmax[pivot]) + 1
            inner_total = np.zeros(base.shape[:2], dtype=np.int64)
            inner_bounds = []
            cand = []
            for combo in itertools.product(*per_factor):
                L = np.full(base.shape[:2], kl0)
                U = np.full(base.shape[:2], ku0)
                for lo_f, hi_f in combo:
                    L = np.maximum(L, lo_f)
                    U = np.minimum(U, hi_f)
                nonempty = L <= U
                fL = np.floor(np.where(nonempty, L, 0)).astype(np.int64)
                fU = np.floor(np.where(nonempty, U, 0)).astype(np.int64)
                ilo, ihi = fL + 2, fU - 1
                n_in = np.where(nonempty, np.maximum(ihi - ilo + 1, 0), 0)
                inner_total += n_in
                inner_bounds.append((np.where(n_in > 0, ilo, 1), np.where(n_in > 0, ihi, 0)))
                for j in (-1, 0, 1):
                    cand.append((fL + j, nonempty))
                for j in (0, 1, 2):
                    cand.append((fU + j, nonempty & (fU + j > fL + 1)))
            counts[s0 : s0 + len(sh)] += inner_total.sum(axis=1)
            # explicit membership for candidates near the ends of each run
            kc = np.stack([c for c, _ in cand], axis=-1)
            ok = np.stack([m for _, m in cand], axis=-1)
            for ilo, ihi in inner_bounds:
                ok &= ~((kc >= ilo[..., None]) & (kc <= ihi[..., None]))
            si, ri, ci = np.nonzero(ok)
            if len(si) == 0:
                continue
            kv = kc[si, ri, ci]
            key = np.stack([si, ri, kv], axis=1)
            key = np.unique(key, axis=0)
            si, ri, kv = key[:, 0], key[:, 1], key[:, 2]
            coords = _full_coords(rows[ri], kv, pivot, d)
            pts = lattice.points_from_coords(coords)
            hit = geo.contains(region, pts + sh[si])
            counts[s0 : s0 + len(sh)] += np.bincount(si[hit], minlength=len(sh))
    return counts


def count_in(lattice: Lattice, region, shift=None) -> int:
    d = lattice.dim
    s = np.zeros(d) if shift is None else np.asarray(shift, dtype=float).reshape(d)
    return int(count_in_many(lattice, region, s[None, :])[0])


# -- fundamental domain -------------------------------------------------------

def sample_fundamental(lattice: Lattice, n: int, seed=None) -> np.ndarray:
    """n points basis @ u with u uniform on [0,1)^d (Philox counter-based stream)."""
    if n < 1:
        raise LatticeError("n must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.random((n, lattice.dim))
    return u @ lattice.basis.T


def reduce_to_fundamental(lattice: Lattice, x):
    """x = basis @ coords + remainder with basis^-1 @ remainder in [0,1)^d."""
    x = np.asarray(x, dtype=float)
    k = np.floor(lattice.coords_of(x)).astype(np.int64)
    for _ in range(4):
        rem = x - lattice.points_from_coords(k)
        u = lattice.coords_of(rem)
        fix = np.where(u >= 1, 1, np.where(u < 0, -1, 0))
        if not np.any(fix):
            break
        k = k + fix
    return k, rem


# -- configuration ------------------------------------------------------------

def lattice_from_json(obj: dict) -> Lattice:
    if not isinstance(obj, dict):
        raise LatticeError("lattice must be an object")
    extra = set(obj) - {"basis", "preset", "preset_params"}
    if extra:
        raise LatticeError(f"unknown key(s) {sorted(extra)}")
    if "basis" in obj:
        if "preset" in obj:
            raise LatticeError("give either 'basis' or 'preset', not both")
        return Lattice(obj["basis"])
    preset = obj.get("preset")
    params = dict(obj.get("preset_params") or {})
    if preset == "golden":
        if params:
            raise LatticeError("golden preset takes no parameters")
        return golden()
    if preset == "liouville":
        from .diophantine import liouville_preset

        return liouville_preset(**params)
    if preset == "integer":
        return identity(int(params.get("d", 2)))
    raise LatticeError(f"unknown preset {preset!r}")
