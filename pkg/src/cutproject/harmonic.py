"""Fourier side of the counting problem.

Conventions: e(x) = exp(-2 pi i x) and F f(xi) = int e(x . xi) f(x) dx, so a
translate f(. - c) picks up the phase exp(-2 pi i c . xi).
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from . import geometry as geo
from . import lattice as lat

K_DECAY = 12
SAFETY = 10.0
MAX_DUAL_POINTS = 10_000_000
GRID_END = 200.0
SERIES_CUTOFF = 1e-4
NOISE_FLOOR = 1e-15


class HarmonicError(ValueError):
    pass


# -- Bessel functions ------------------------------------------------------

def _check_order(nu):
    nu = float(nu)
    if not (0 <= nu <= 30) or (2 * nu) != int(2 * nu):
        raise HarmonicError(f"order must be an integer or half-integer in [0, 30], got {nu}")
    return nu


def bessel_j(nu, x):
    """J_nu(x) for integer or half-integer nu in [0, 30] and 0 <= x <= 1e6."""
    nu = _check_order(nu)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1e6) or np.any(~np.isfinite(x)):
        raise HarmonicError("argument must lie in [0, 1e6]")
    out = special.jv(nu, x)
    return float(out) if out.ndim == 0 else out


def bessel_asymptotic(nu, x):
    """Leading Hankel form sqrt(2/(pi x)) cos(x - nu pi/2 - pi/4) and its error scale.

    Returns (value, bound) with bound = kappa / x^(3/2), kappa = |4 nu^2 - 1| / (8 sqrt(pi/2)),
    the size of the first neglected term.
    """
    nu = _check_order(nu)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise HarmonicError("asymptotic form needs x > 0")
    lead = np.sqrt(2 / (np.pi * x)) * np.cos(x - nu * np.pi / 2 - np.pi / 4)
    kappa = abs(4 * nu * nu - 1) / (8 * math.sqrt(math.pi / 2))
    return lead, kappa / x**1.5


def _jinc(nu, z):
    """J_nu(z) / z^nu with the series near 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < SERIES_CUTOFF
    if np.any(small):
        zs = z[small]
        h = (zs / 2) ** 2
        c0 = 1 / (2**nu * math.gamma(nu + 1))
        out[small] = c0 * (1 - h / (nu + 1) + h * h / (2 * (nu + 1) * (nu + 2)))
    big = ~small
    if np.any(big):
        zb = z[big]
        out[big] = special.jv(nu, zb) / zb**nu
    return out


@lru_cache(maxsize=None)
def _bessel_peak(nu: float) -> float:
    """sup_z sqrt(z) |J_nu(z)|, numerically, with 5% headroom."""
    z = np.linspace(1e-6, 4000, 2_000_001)
    peak = float(np.max(np.sqrt(z) * np.abs(special.jv(nu, z))))
    return 1.05 * max(peak, math.sqrt(2 / math.pi))


# -- transforms of indicators ----------------------------------------------

def _xi_array(region, xi):
    m = region.dim
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0:
        if m != 1:
            raise HarmonicError("dimension mismatch")
        xi = xi.reshape(1)
    if xi.shape[-1] != m:
        raise HarmonicError(f"xi has {xi.shape[-1]} coordinates, region has {m}")
    return xi


def _sinc_part(h, xi):
    # sin(2 pi h xi) / (pi xi) with value 2h at 0
    return 2 * h * np.sinc(2 * h * xi)


def fourier_indicator(region, xi):
    """Fourier transform of the indicator of a ball, box or interval union."""
    xi = _xi_array(region, xi)
    if isinstance(region, geo.Ball):
        m = region.dim
        r = region.radius
        rho = np.sqrt(np.sum(xi * xi, axis=-1))
        val = r**m * (2 * np.pi) ** (m / 2) * _jinc(m / 2, 2 * np.pi * r * rho)
        c = np.asarray(region.center)
    elif isinstance(region, geo.Box):
        h = np.asarray(region.halfwidths)
        val = np.prod(_sinc_part(h, xi), axis=-1)
        c = np.asarray(region.center)
    elif isinstance(region, geo.IntervalUnion):
        y = xi[..., 0]
        val = np.zeros(y.shape, dtype=complex)
        for a, b in region.intervals:
            val = val + _sinc_part((b - a) / 2, y) * np.exp(-1j * np.pi * (a + b) * y)
        return val if val.ndim else complex(val)
    else:
        raise HarmonicError(f"unknown region {region!r}")
    val = val * np.exp(-2j * np.pi * (xi @ c))
    return val if np.ndim(val) else complex(val)


@dataclass(frozen=True)
class RadialMajorant:
    """r -> min(top, c / r^p), nonincreasing, bounds |F chi| along every ray."""

    top: float
    c: float
    p: float

    def __call__(self, r):
        return np.minimum(self.top, self.c / np.maximum(r, 1e-300) ** self.p)

    @property
    def knee(self) -> float:
        return (self.c / self.top) ** (1 / self.p)


def indicator_majorant(region) -> RadialMajorant:
    """Nonincreasing radial function M with |F chi(xi)| <= M(|xi|)."""
    vol = geo.volume(region)
    if isinstance(region, geo.Ball):
        m = region.dim
        c = _bessel_peak(m / 2) * region.radius ** ((m - 1) / 2) / math.sqrt(2 * math.pi)
        return RadialMajorant(vol, c, (m + 1) / 2)
    if isinstance(region, geo.Box):
        h = np.asarray(region.halfwidths)
        c = float(np.max(vol / (2 * h))) * math.sqrt(region.dim) / math.pi
        return RadialMajorant(vol, c, 1.0)
    if isinstance(region, geo.IntervalUnion):
        return RadialMajorant(vol, len(region.intervals) / math.pi, 1.0)
    raise HarmonicError(f"unknown region {region!r}")


@dataclass(frozen=True)
class DecayClass:
    order: float
    region_class: str


def decay_class(region, s: Optional[float] = None) -> DecayClass:
    if s is not None:
        return DecayClass(float(s), "s-regular")
    if isinstance(region, geo.Ball):
        return DecayClass((region.dim + 1) / 2, "strictly-convex")
    if isinstance(region, geo.Box):
        return DecayClass(1.0, "box")
    return DecayClass(1.0, "finite-perimeter")


# -- the bump and its transform --------------------------------------------

def bump(x):
    """Unnormalized exp(-1/(1-x^2)) on (-1, 1), zero elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(-1 / (1 - x[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def _gauss(n: int):
    x, w = special.roots_legendre(n)
    return x, w


@lru_cache(maxsize=None)
def _panel_rule(panels: int, order: int = 16):
    """Composite Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = _gauss(order)
    edges = np.linspace(0, 1, panels + 1)
    h = np.diff(edges)[:, None] / 2
    u = (edges[:-1, None] + h) + h * x[None, :]
    return u.ravel(), (h * w[None, :]).ravel()


def _radial_kernel(m: int, z):
    """Normalized spherical average of exp(i x . xi) in dim m; equals 1 at 0."""
    if m == 1:
        return np.cos(z)
    if m == 2:
        return special.j0(z)
    if m == 3:
        return np.sinc(z / np.pi)
    nu = m / 2 - 1
    return math.gamma(nu + 1) * 2**nu * _jinc(nu, z)


def _direct_transform(m: int, eta, panels: int = 512):
    u, w = _panel_rule(panels)
    wt = w * bump(u) * u ** (m - 1)
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    out = np.empty(eta.shape)
    step = max(1, 4_000_000 // len(u))
    for i in range(0, len(eta), step):
        out[i:i + step] = _radial_kernel(m, 2 * np.pi * np.outer(eta[i:i + step], u)) @ wt
    return out / wt.sum()


@dataclass
class _BumpTable:
    spline_lo: CubicSpline
    spline_hi: CubicSpline
    split: float
    grid: np.ndarray
    suffix_sup: np.ndarray
    c_k: float


_TABLE_VERSION = 2


def _cache_dir():
    root = os.environ.get("CUTPROJECT_CACHE") or os.path.join(os.path.expanduser("~"), ".cache", "cutproject")
    return root


def _table_values(m: int):
    g1 = np.linspace(0, 64, 64_001)
    g2 = np.linspace(64, GRID_END, 13_601)
    path = os.path.join(_cache_dir(), f"bump_m{m}_v{_TABLE_VERSION}.npz")
    try:
        with np.load(path) as z:
            if len(z["v1"]) == len(g1) and len(z["v2"]) == len(g2):
                return g1, z["v1"], g2, z["v2"]
    except (OSError, KeyError, ValueError):
        pass
    # fine grid where the transform is visible, coarser grid in the far tail
    v1 = _direct_transform(m, g1, 128)
    v2 = _direct_transform(m, g2, 512)
    try:
        os.makedirs(_cache_dir(), exist_ok=True)
        tmp = path + f".{os.getpid()}.tmp.npz"
        np.savez(tmp, v1=v1, v2=v2)
        os.replace(tmp, path)
    except OSError:
        pass
    return g1, v1, g2, v2


@lru_cache(maxsize=None)
def _bump_table(m: int) -> _BumpTable:
    g1, v1, g2, v2 = _table_values(m)
    grid = np.concatenate([g1, g2[1:]])
    vals = np.concatenate([v1, v2[1:]])
    c_k = float(np.max(np.abs(vals) * (1 + grid) ** K_DECAY))
    # nonincreasing majorant from the grid: running sup from the right,
    # 1% headroom for values between nodes plus the quadrature noise floor
    sup = 1.01 * np.maximum.accumulate(np.abs(vals)[::-1])[::-1] + NOISE_FLOOR
    return _BumpTable(CubicSpline(g1, v1), CubicSpline(g2, v2), 64.0, grid, sup, c_k)


def bump_transform(m: int, eta):
    """Transform of the unit-mass radial bump in dim m at radius eta = |xi|."""
    tab = _bump_table(int(m))
    eta = np.abs(np.asarray(eta, dtype=float))
    out = np.where(eta <= tab.split, tab.spline_lo(np.minimum(eta, tab.split)),
                   tab.spline_hi(np.clip(eta, tab.split, GRID_END)))
    far = eta > GRID_END
    if np.any(far):
        out = np.where(far, 0.0, out)
        out[far] = _direct_transform(m, eta[far], 2048)
    return out if out.ndim else float(out)


def bump_majorant(m: int, eta):
    """Nonincreasing bound on |bump_transform| (grid sup, then the K=12 envelope)."""
    tab = _bump_table(int(m))
    eta = np.abs(np.asarray(eta, dtype=float))
    env = np.minimum(1.0, tab.c_k * (1 + eta) ** (-K_DECAY))
    idx = np.searchsorted(tab.grid, eta, side="right") - 1
    inside = eta <= GRID_END
    grid_part = np.where(inside, tab.suffix_sup[np.clip(idx, 0, len(tab.grid) - 1)], np.inf)
    return np.minimum(grid_part, env)


def bump_envelope_constant(m: int) -> float:
    return _bump_table(int(m)).c_k


@dataclass(frozen=True)
class MollifierParams:
    a_down: float
    a_left: float
    sigma: float = 1.0
    delta: float = 0.5

    def __post_init__(self):
        if not (self.a_down > 0 and self.a_left > 0):
            raise HarmonicError("smoothing radii must be positive")
        if not self.a_left <= 1:
            raise HarmonicError("a_left must be at most 1")
        if not 0 < self.sigma <= 1:
            raise HarmonicError("sigma must lie in (0, 1]")
        if not 0 < self.delta < 1:
            raise HarmonicError("delta must lie in (0, 1)")


def mollifier_fourier(params: MollifierParams, xi, split: geo.SplitSpace):
    """[F rho_down](a_down xi_down) * [F rho_left](a_left xi_left)."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != split.d:
        raise HarmonicError("xi has the wrong dimension")
    r0 = np.linalg.norm(split.down(xi), axis=-1)
    r1 = np.linalg.norm(split.left(xi), axis=-1)
    out = (bump_transform(split.d_down, params.a_down * r0)
           * bump_transform(split.d_left, params.a_left * r1))
    return out if np.ndim(out) else float(out)


# -- smoothed indicators in real space -------------------------------------

@lru_cache(maxsize=None)
def _bump_mass_1d() -> float:
    u, w = _panel_rule(64)
    return 2 * float(w @ bump(u))


def bump_cdf(u):
    """Distribution function of the unit-mass 1-D bump; exactly 0 / 1 outside (-1, 1)."""
    u = np.asarray(u, dtype=float)
    x, w = _gauss(96)
    out = np.where(u <= -1, 0.0, 1.0)
    mid = np.abs(u) < 1
    if np.any(mid):
        um = u[mid]
        # integrate over the shorter side for accuracy
        lo_side = um <= 0
        a = np.where(lo_side, -1.0, um)
        b = np.where(lo_side, um, 1.0)
        half = (b - a)[:, None] / 2
        nodes = (a + b)[:, None] / 2 + half * x[None, :]
        part = (bump(nodes) @ w) * half[:, 0] / _bump_mass_1d()
        out[mid] = np.clip(np.where(lo_side, part, 1 - part), 0.0, 1.0)
    return out


def _smooth_intervals(intervals, x, a):
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for lo, hi in intervals:
        total += bump_cdf((x - lo) / a) - bump_cdf((x - hi) / a)
    return np.clip(total, 0.0, 1.0)


def _radial_weights(m: int, pieces):
    x, w = _gauss(64)
    us, ws = [], []
    for lo, hi in pieces:
        u = lo + (hi - lo) * (x + 1) / 2
        us.append(u)
        ws.append(w * (hi - lo) / 2 * bump(u) * u ** (m - 1))
    return np.concatenate(us), np.concatenate(ws)


@lru_cache(maxsize=None)
def _radial_mass(m: int) -> float:
    u, w = _panel_rule(64)
    return float(w @ (bump(u) * u ** (m - 1)))


def _smooth_ball(ball: geo.Ball, x, a):
    """(chi_ball * rho_a)(x) for the radial bump rho_a in dim m >= 2."""
    m = ball.dim
    R = ball.radius
    x = np.atleast_2d(np.asarray(x, dtype=float))
    rho0 = np.linalg.norm(x - np.asarray(ball.center), axis=-1)
    out = np.empty(len(x))
    mass = _radial_mass(m)
    half = (m - 1) / 2
    for i, p in enumerate(rho0):
        if p + a <= R:
            out[i] = 1.0
            continue
        if p - a >= R:
            out[i] = 0.0
            continue
        cuts = sorted({0.0, 1.0, *[c for c in (abs(p - R) / a, (p + R) / a) if 0 < c < 1]})
        u, w = _radial_weights(m, list(zip(cuts, cuts[1:])))
        r = a * u
        if p == 0:
            frac = (r < R).astype(float)
        else:
            c0 = np.clip((R * R - p * p - r * r) / (2 * p * r), -1.0, 1.0)
            frac = special.betainc(half, half, (1 + c0) / 2)
        out[i] = min(1.0, max(0.0, float(w @ frac) / mass))
    return out


def smoothed_indicator(region, x, a: float):
    """(chi_region * rho_a)(x) with rho_a the bump of radius a in the region's dimension."""
    m = region.dim
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and m > 1:
        x = x[None, :]
    if m == 1:
        y = x[..., 0] if x.ndim > 1 else x
        if isinstance(region, geo.Ball):
            c = region.center[0]
            ivs = [(c - region.radius, c + region.radius)]
        elif isinstance(region, geo.Box):
            c, h = region.center[0], region.halfwidths[0]
            ivs = [(c - h, c + h)]
        else:
            ivs = region.components()
        return _smooth_intervals(ivs, y, a)
    if isinstance(region, geo.Ball):
        return _smooth_ball(region, x, a)
    raise HarmonicError("smoothing of boxes is only implemented in dimension 1")


def approximations(spec, t: float, params: MollifierParams, sign: int):
    """(A, B): the outer or inner approximations of t*search and window."""
    if sign not in (1, -1):
        raise HarmonicError("sign must be +1 or -1")
    A = geo.dilate(spec.search, t)
    B = spec.window
    if sign > 0:
        return geo.inflate(A, params.a_down), geo.inflate(B, params.a_left)
    return geo.deflate(A, params.a_down), geo.deflate(B, params.a_left)


def _check_use(spec, t, params):
    if not t > 0:
        raise HarmonicError("t must be positive")
    if not params.a_down < t / 4:
        raise HarmonicError("need a_down < t/4")


@dataclass(frozen=True)
class SmoothedCount:
    value: float
    n_points: int
    empty: bool = False

    def __float__(self):
        return self.value


def smoothed_count(spec, t: float, params: MollifierParams, sign: int) -> SmoothedCount:
    """Sum over the lattice of the mollified indicator of (t search x window)^(+/-), at gamma - s."""
    _check_use(spec, t, params)
    A, B = approximations(spec, t, params, sign)
    if A is None or B is None:
        return SmoothedCount(0.0, 0, True)
    support = geo.ProductRegion(geo.inflate(A, params.a_down), geo.inflate(B, params.a_left))
    s = spec.shift_vector
    found = lat.enumerate_in(spec.lattice, support, -s)
    if len(found) == 0:
        return SmoothedCount(0.0, 0)
    x = found.points - s
    f0 = smoothed_indicator(A, spec.split.down(x), params.a_down)
    f1 = smoothed_indicator(B, spec.split.left(x), params.a_left)
    return SmoothedCount(math.fsum(f0 * f1), len(found))


# -- the dual-lattice side -------------------------------------------------

@dataclass(frozen=True)
class PoissonBreakdown:
    volume_term: float
    remainder_term: float
    truncation_radius: float
    tail_bound: float
    truncation_radius_left: float = 0.0
    n_dual: int = 0

    @property
    def total(self) -> float:
        return self.volume_term + self.remainder_term


def _sphere_area(m: int) -> float:
    return m * geo.unit_ball_volume(m)


def _integrate(f, lo, m, D, scale, far):
    """Upper bound on |S^{m-1}| * int_lo^inf f(u) (u + D)^(m-1) du for nonincreasing f.

    Riemann upper sum on a geometric grid (f at the left end, the weight at the
    right end), then `far(U)`, a bound on the integral beyond the last node.
    """
    w = np.concatenate([[0.0], np.geomspace(1e-3 / scale, 1e4 / scale, 3000)])
    u = lo + w
    fu = np.asarray(f(u[:-1]), dtype=float)
    total = float(np.sum(fu * (u[1:] + D) ** (m - 1) * np.diff(u)))
    return _sphere_area(m) * (total + far(u[-1]))


def _full_integral(f, m, D, scale, far):
    """int over R^m of f(max(|x| - D, 0)) dx."""
    f0 = float(f(np.array([0.0]))[0])
    return geo.unit_ball_volume(m) * D**m * f0 + _integrate(f, 0.0, m, D, scale, far)


def _tail_integral(f, Y, m, D, scale, far):
    """int over |y| > Y - D of min(f(max(|y| - D, 0)), f(Y)) dy."""
    fY = float(f(np.array([Y]))[0])
    shell = geo.unit_ball_volume(m) * ((Y + D) ** m - max(Y - D, 0.0) ** m)
    return fY * shell + _integrate(f, Y, m, D, scale, far)


def _far_bound(top, c_k, a, m, D, power):
    """Bound on int_U^inf (top * C_K (1 + a u)^-K)^power (u + D)^(m-1) du for U >= D."""
    k = K_DECAY * power

    def far(U):
        U = max(U, D)
        # (u + D)^(m-1) <= (2u)^(m-1) <= 2^(m-1) (1 + a u)^(m-1) / a^(m-1)
        return ((top * c_k) ** power * 2 ** (m - 1) / a**m
                * (1 + a * U) ** (m - k) / (k - m))
    return far


class _TailModel:
    """Radial majorants f0, f1 of the two factors of the dual summand."""

    def __init__(self, A, B, params, split, power=1):
        ma, mb = indicator_majorant(A), indicator_majorant(B)
        a0, a1 = params.a_down, params.a_left
        m0, m1 = split.d_down, split.d_left
        self.f0 = lambda r: (ma(r) * bump_majorant(m0, a0 * r)) ** power
        self.f1 = lambda r: (mb(r) * bump_majorant(m1, a1 * r)) ** power
        self.top0, self.top1 = geo.volume(A), geo.volume(B)
        self.c0, self.c1 = bump_envelope_constant(m0), bump_envelope_constant(m1)
        self.m0, self.m1, self.s0, self.s1 = m0, m1, a0, a1
        self.power = power
        self.safety = SAFETY

    def far0(self, D):
        return _far_bound(self.top0, self.c0, self.s0, self.m0, D, self.power)

    def far1(self, D):
        return _far_bound(self.top1, self.c1, self.s1, self.m1, D, self.power)


def _radius_for(tail, target, start=1.0):
    """Smallest radius (up to 1%) with tail(radius) <= target."""
    lo, hi = 0.0, start
    while tail(hi) > target:
        lo, hi = hi, hi * 2
        if hi > 1e12:
            return math.inf
    while hi - lo > 0.01 * hi:
        mid = (lo + hi) / 2
        if tail(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def cell_extents(basis, split):
    """(D_down, D_left): sup of |p_down| and |p_left| over the parallelotope of basis."""
    b = np.asarray(basis)
    return (float(np.sum(np.linalg.norm(b[: split.d_down], axis=0))),
            float(np.sum(np.linalg.norm(b[split.d_down:], axis=0))))


def _candidate_cells(dual_lattice, split):
    """Cell extents of anisotropically reduced bases of the dual lattice."""
    seen = set()
    out = []
    for k in range(-12, 41, 2):
        lam = 2.0**k
        scaled = np.array(dual_lattice.basis)
        scaled[: split.d_down] *= lam
        try:
            _, U = lat.lll_reduce(scaled)
        except lat.LatticeError:
            continue
        ext = cell_extents(dual_lattice.basis @ U, split)
        key = (round(ext[0], 12), round(ext[1], 12))
        if key not in seen:
            seen.add(key)
            out.append(ext)
    return out


@dataclass(frozen=True)
class Truncation:
    X: float
    Y: float
    tail: float
    cell: tuple
    estimate: float


def truncate_dual(model, split, dual_lattice, tolerance, scale=1.0):
    """Radii X, Y for |xi_down| < X, |xi_left| < Y with certified tail <= tolerance.

    For a fundamental cell with extents (D0, D1) every omitted dual point is charged
    to its cell, giving
        tail <= scale * [I0(D0) J1(Y; D1) + J0(X; D0) I1(D1)]
    where I is the integral of the majorant pushed in by D and J its tail beyond the
    radius. The cell is chosen among reduced bases to minimise the enumeration size.
    """
    m0, m1 = split.d_down, split.d_left
    best = None
    for D0, D1 in _candidate_cells(dual_lattice, split):
        far0, far1 = model.far0(D0), model.far1(D1)
        I0 = _full_integral(model.f0, m0, D0, model.s0, far0)
        I1 = _full_integral(model.f1, m1, D1, model.s1, far1)
        k = model.safety * scale
        td = lambda X: k * _tail_integral(model.f0, X, m0, D0, model.s0, far0) * I1
        tl = lambda Y: k * I0 * _tail_integral(model.f1, Y, m1, D1, model.s1, far1)
        X = _radius_for(td, tolerance / 2)
        Y = _radius_for(tl, tolerance / 2)
        if not (math.isfinite(X) and math.isfinite(Y)):
            continue
        est = (geo.unit_ball_volume(m0) * X**m0 * geo.unit_ball_volume(m1) * Y**m1
               / dual_lattice.covolume)
        if best is None or est < best.estimate:
            best = Truncation(X, Y, td(X) + tl(Y), (D0, D1), est)
    if best is None:
        raise lat.BudgetError("tail bound does not reach the tolerance")
    if best.estimate > MAX_DUAL_POINTS:
        raise lat.BudgetError(
            f"tolerance {tolerance:g} needs about {best.estimate:.3g} dual points (budget {MAX_DUAL_POINTS:g})")
    return best


def dual_points(lattice: lat.Lattice, split, X, Y):
    """Chunks of nonzero dual vectors with |xi_down| < X and |xi_left| < Y."""
    du = lat.dual(lattice)
    box = geo.ProductRegion(geo.Ball(np.zeros(split.d_down), X), geo.Ball(np.zeros(split.d_left), Y))
    for _, pts in lat.iter_enumerate(du, box, max_points=4 * MAX_DUAL_POINTS):
        nz = np.any(pts != 0, axis=1)
        if np.any(nz):
            yield pts[nz]


def _pairwise_sum(parts):
    parts = list(parts)
    if not parts:
        return 0.0
    while len(parts) > 1:
        parts = [parts[i] + parts[i + 1] if i + 1 < len(parts) else parts[i]
                 for i in range(0, len(parts), 2)]
    return parts[0]


def poisson_dual_sum(spec, t: float, params: MollifierParams, sign: int,
                     tolerance: float = 1e-8) -> PoissonBreakdown:
    """Split the smoothed count into V (the zero frequency) and R (the rest), R truncated."""
    _check_use(spec, t, params)
    if not tolerance > 0:
        raise HarmonicError("tolerance must be positive")
    A, B = approximations(spec, t, params, sign)
    if A is None or B is None:
        return PoissonBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, 0)
    split = spec.split
    covol = spec.lattice.covolume
    V = geo.volume(A) * geo.volume(B) / covol
    du = lat.dual(spec.lattice)
    tr = truncate_dual(_TailModel(A, B, params, split), split, du, tolerance)
    X, Y, tail = tr.X, tr.Y, tr.tail
    s = spec.shift_vector
    parts, n = [], 0
    for xi in dual_points(spec.lattice, split, X, Y):
        x0, x1 = split.down(xi), split.left(xi)
        term = (fourier_indicator(A, x0) * fourier_indicator(B, x1)
                * np.exp(-2j * np.pi * (xi @ s)))
        weight = (bump_transform(split.d_down, params.a_down * np.linalg.norm(x0, axis=1))
                  * bump_transform(split.d_left, params.a_left * np.linalg.norm(x1, axis=1)))
        parts.append(math.fsum(np.real(term) * weight))
        n += len(xi)
    R = _pairwise_sum(parts) / covol
    return PoissonBreakdown(V, R, X, tail, Y, n)


# -- parameter recipes ------------------------------------------------------

def choose_params(t: float, s: float, psi, delta: float, d_down: int = 1, d_left: int = 1,
                  L_down: Optional[float] = None) -> MollifierParams:
    """Smoothing radii balancing the volume error against the dual-sum remainder.

    Slowly growing psi: sigma = 1, a_down = t^(1/2), a_left = psi(t)^(delta-1).
    Power-law psi of speed mu:
        sigma  = d_down / (s mu (1-delta)(d_down - L_down + 1) + L_down + (1-delta) d_left mu)
        a_down = t^(1 + sigma mu (delta s - s)),   a_left = psi(t^sigma)^(delta-1).
    """
    if not 0 < delta < 1:
        raise HarmonicError("delta must lie in (0, 1)")
    if not psi(t) > 1:
        raise HarmonicError("need psi(t) > 1")
    if psi.kind == "power":
        mu = psi.mu
        L = (d_down + 1) / 2 if L_down is None else float(L_down)
        sigma = d_down / (s * mu * (1 - delta) * (d_down - L + 1) + L + (1 - delta) * d_left * mu)
        sigma = min(sigma, 1.0)
        a_down = t ** (1 + sigma * mu * (delta * s - s))
        a_left = psi(t**sigma) ** (delta - 1)
        return MollifierParams(float(a_down), float(min(a_left, 1.0)), float(sigma), float(delta))
    a_left = psi(t) ** (delta - 1)
    return MollifierParams(math.sqrt(t), float(min(a_left, 1.0)), 1.0, float(delta))


def sigma_formula(d_down, d_left, s, mu, L_down, delta) -> float:
    return d_down / (s * mu * (1 - delta) * (d_down - L_down + 1) + L_down + (1 - delta) * d_left * mu)
