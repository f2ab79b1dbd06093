"""Number variance of the discrepancy over lattice translates.

Three routes to NV_t = E_s |Delta_t(s)|^2 (s uniform on E / Gamma):
  * diffraction: sum over the dual lattice of |F chi_{t search}|^2 |F chi_window|^2 / covol^2,
  * real space:  sum over the lattice of overlap volumes, finite and exact,
  * Monte Carlo over random translates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import mpmath
import numpy as np
from scipy import special

from . import diophantine as dio
from . import geometry as geo
from . import harmonic as hm
from . import lattice as lat

NV_SAFETY = 1.0
MEAN_FLAG_SIGMAS = 5.0


class VarianceError(ValueError):
    pass


# -- diffraction route ------------------------------------------------------

@dataclass(frozen=True)
class DiffractionResult:
    value: float
    truncation_radius: float
    tail_bound: float
    truncation_radius_left: float = 0.0
    n_terms: int = 0


class _SquareModel:
    """Squared majorants of the two transforms, no mollifier."""

    def __init__(self, A, B):
        self.ma, self.mb = hm.indicator_majorant(A), hm.indicator_majorant(B)
        self.f0 = lambda r: self.ma(r) ** 2
        self.f1 = lambda r: self.mb(r) ** 2
        self.s0, self.s1 = 1 / self.ma.knee, 1 / self.mb.knee
        self.m0, self.m1 = A.dim, B.dim
        self.safety = NV_SAFETY

    @staticmethod
    def _far(maj, m, D):
        k = 2 * maj.p
        if not k > m:
            raise VarianceError("squared transform is not integrable; use a ball search region in dim >= 2")

        def far(U):
            U = max(U, D)
            # (u + D)^(m-1) <= (2u)^(m-1) for u >= D
            return maj.c**2 * 2 ** (m - 1) * U ** (m - k) / (k - m)
        return far

    def far0(self, D):
        return self._far(self.ma, self.m0, D)

    def far1(self, D):
        return self._far(self.mb, self.m1, D)


def nv_diffraction(lattice: lat.Lattice, split: geo.SplitSpace, search, window, t: float,
                   tolerance: float = 1e-3) -> DiffractionResult:
    """Truncated diffraction sum; the omitted terms are bounded by tail_bound."""
    if not t > 0:
        raise VarianceError("t must be positive")
    if not tolerance > 0:
        raise VarianceError("tolerance must be positive")
    A = geo.dilate(search, t)
    covol = lattice.covolume
    du = lat.dual(lattice)
    # the cell count carries 1/covol(dual) = covol, the formula 1/covol^2
    tr = hm.truncate_dual(_SquareModel(A, window), split, du, tolerance, scale=1 / covol)
    X, Y, tail = tr.X, tr.Y, tr.tail
    parts, n = [], 0
    for xi in hm.dual_points(lattice, split, X, Y):
        f0 = np.abs(hm.fourier_indicator(A, split.down(xi))) ** 2
        f1 = np.abs(hm.fourier_indicator(window, split.left(xi))) ** 2
        parts.append(math.fsum(f0 * f1))
        n += len(xi)
    value = hm._pairwise_sum(parts) / covol**2
    return DiffractionResult(float(value), X, float(tail), Y, n)


# -- real-space route -------------------------------------------------------

def autocorrelation(region, x):
    """vol(region & (region + x)) for each row of x."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if region.dim == 1 else x[None, :]
    if isinstance(region, geo.Ball):
        m = region.dim
        R = region.radius
        d = np.linalg.norm(x, axis=-1)
        u = np.clip(1 - (d / (2 * R)) ** 2, 0.0, 1.0)
        # two caps of height R - d/2 each
        out = geo.volume(region) * special.betainc((m + 1) / 2, 0.5, u)
        return np.where(d < 2 * R, out, 0.0)
    if isinstance(region, geo.Box):
        h = np.asarray(region.halfwidths)
        return np.prod(np.maximum(2 * h - np.abs(x), 0.0), axis=-1)
    if isinstance(region, geo.IntervalUnion):
        y = x[..., 0]
        out = np.zeros(y.shape)
        for a0, b0 in region.intervals:
            for a1, b1 in region.intervals:
                out += np.maximum(np.minimum(b0, b1 + y) - np.maximum(a0, a1 + y), 0.0)
        return out
    raise VarianceError(f"unknown region {region!r}")


def _difference_box(region):
    lo, hi = geo.bounding_box(region)
    w = hi - lo
    return geo.Box(np.zeros(len(w)), w)


def nv_realspace(lattice: lat.Lattice, split: geo.SplitSpace, search, window, t: float) -> float:
    """(1/covol) sum_gamma g_{t search}(gamma_down) g_window(gamma_left) - V^2; a finite sum."""
    A = geo.dilate(search, t)
    covol = lattice.covolume
    body = geo.ProductRegion(_difference_box(A), _difference_box(window))
    parts = []
    for _, pts in lat.iter_enumerate(lattice, body):
        g = autocorrelation(A, split.down(pts)) * autocorrelation(window, split.left(pts))
        parts.append(math.fsum(g))
    V = geo.volume(A) * geo.volume(window) / covol
    return float(hm._pairwise_sum(parts) / covol - V * V)


# -- Monte Carlo route ------------------------------------------------------

@dataclass(frozen=True)
class MCStats:
    nv: float
    nv_stderr: float
    l1: float
    l1_stderr: float
    mean: float
    mean_stderr: float
    n_samples: int
    seed: Optional[int]
    shifts: np.ndarray = field(repr=False, compare=False, default=None)
    deltas: np.ndarray = field(repr=False, compare=False, default=None)

    def __iter__(self):
        return iter((self.nv, self.nv_stderr, self.l1, self.l1_stderr, self.mean, self.mean_stderr))


def _stderr(v):
    return float(np.std(v, ddof=1) / math.sqrt(len(v)))


def nv_montecarlo(spec, t: float, n_samples: int, seed=None) -> MCStats:
    """Moments of Delta_t(s) for s uniform in the fundamental cell."""
    from .modelset import main_term
    if n_samples < 100:
        raise VarianceError("need at least 100 samples")
    s = lat.sample_fundamental(spec.lattice, int(n_samples), seed)
    counts = lat.count_in_many(spec.lattice, spec.region(t), -s)
    delta = counts - main_term(spec, t)
    sq, ab = delta**2, np.abs(delta)
    return MCStats(float(sq.mean()), _stderr(sq), float(ab.mean()), _stderr(ab),
                   float(delta.mean()), _stderr(delta), int(n_samples), seed, s, delta)


@dataclass(frozen=True)
class VarianceReport:
    t: float
    nv_diffraction: Optional[float]
    truncation_radius: Optional[float]
    tail_bound: Optional[float]
    nv_mc: Optional[float]
    mc_stderr: Optional[float]
    l1_mc: Optional[float]
    mean_mc: Optional[float]
    n_samples: int
    seed: Optional[int]
    mean_stderr: Optional[float] = None
    mean_flagged: bool = False

    def as_row(self):
        return (self.t, self.nv_diffraction, self.tail_bound, self.nv_mc, self.mc_stderr,
                self.l1_mc, self.mean_mc)


def variance_report(spec, t: float, mode: str = "both", n_samples: int = 10_000, seed=None,
                    tolerance: float = 1e-3) -> VarianceReport:
    if mode not in ("diffraction", "mc", "both"):
        raise VarianceError(f"unknown mode {mode!r}")
    diff = mc = None
    if mode in ("diffraction", "both"):
        diff = nv_diffraction(spec.lattice, spec.split, spec.search, spec.window, t, tolerance)
    if mode in ("mc", "both"):
        mc = nv_montecarlo(spec, t, n_samples, seed)
    flagged = bool(mc is not None and abs(mc.mean) > MEAN_FLAG_SIGMAS * mc.mean_stderr)
    return VarianceReport(
        float(t),
        diff.value if diff else None, diff.truncation_radius if diff else None,
        diff.tail_bound if diff else None,
        mc.nv if mc else None, mc.nv_stderr if mc else None, mc.l1 if mc else None,
        mc.mean if mc else None, mc.n_samples if mc else 0, seed,
        mc.mean_stderr if mc else None, flagged)


# -- Fourier coefficients and lower bounds ----------------------------------

def fourier_coefficient(lattice: lat.Lattice, split: geo.SplitSpace, search, window, t: float,
                        dual_point) -> complex:
    """E_s[Delta_t(s) exp(-2 pi i xi . s)] for a nonzero dual vector xi.

    Equals t^d_down F chi_search(-t xi_down) F chi_window(-xi_left) / covol.
    """
    xi = np.asarray(dual_point, dtype=float).reshape(split.d)
    if not np.any(xi != 0):
        raise VarianceError("the zero frequency carries the mean, which vanishes")
    A = geo.dilate(search, t)
    val = (hm.fourier_indicator(A, -split.down(xi)) * hm.fourier_indicator(window, -split.left(xi)))
    return complex(val) / lattice.covolume


@dataclass(frozen=True)
class L1Witness:
    value: float
    dual_point: tuple
    n_candidates: int


def l1_lower_witness(lattice: lat.Lattice, split: geo.SplitSpace, window, t: float,
                     dual_search_radius: float, search=None) -> L1Witness:
    """Largest |coefficient| over dual vectors with |xi| <= radius and |xi_left| <= 1/(2R).

    Any single coefficient bounds E|Delta| from below.
    """
    if search is None:
        search = geo.Ball(np.zeros(split.d_down), 1.0)
    R = geo.circumradius(window)
    left_cap = 1 / (2 * R)
    du = lat.dual(lattice)
    region = geo.Ball(np.zeros(split.d), dual_search_radius)
    A = geo.dilate(search, t)
    best, arg, n = -1.0, None, 0
    for _, pts in lat.iter_enumerate(du, region):
        keep = np.any(pts != 0, axis=1) & (np.linalg.norm(split.left(pts), axis=1) <= left_cap)
        pts = pts[keep]
        if not len(pts):
            continue
        n += len(pts)
        vals = np.abs(hm.fourier_indicator(A, -split.down(pts))
                      * hm.fourier_indicator(window, -split.left(pts))) / lattice.covolume
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, arg = float(vals[i]), tuple(float(v) for v in pts[i])
    if arg is None:
        raise VarianceError("no admissible dual vector in range; enlarge the radius or shrink the window")
    return L1Witness(best, arg, n)


# -- Liouvillean spikes -----------------------------------------------------

@dataclass(frozen=True)
class SpikeRow:
    n: int
    log2_t: float
    t: Optional[float]
    q_minus_m: int
    sin2_arg: Fraction  # r (q_n - m_n) mod 1
    sin2: float
    rhs: str  # exact right-hand side, decimal string
    lhs_spike: Optional[float]
    lhs_diffraction: Optional[float]
    holds: Optional[bool]


def divergence_gauge(power: float = 1.0):
    """f(t) = log(1 + t)^power, evaluated in mpmath so huge t are fine."""
    def f(t):
        return mpmath.log1p(mpmath.mpf(t)) ** power
    return f


def _log_psi(psi: dio.PsiFunction, log_t):
    # psi at t = exp(log_t), mpmath; for the log class log(1+t) ~ log t when t is huge
    t_big = log_t > 700
    if psi.kind == "power":
        return mpmath.mpf(psi.c) * mpmath.exp(psi.exponent * log_t)
    lg = log_t if t_big else mpmath.log1p(mpmath.exp(log_t))
    return mpmath.mpf(psi.c) * lg ** psi.exponent


def liouville_spike_scan(lattice: lat.Lattice, split: geo.SplitSpace, search, r,
                         upsilon=None, f_power: float = 1.0, diffraction_t_max: float = 1e4,
                         tolerance: float = 1e-3) -> list:
    """Ratio NV_t psi(t)^2 f(t) / t^(2 d_down) at t_n = |xi_down^(n)|^-1 against
    f(t_n) vol(search)^2 vol(upsilon)^2 sin^2(2 pi r (q_n - m_n)) / (4 pi^2 covol^2).

    The lattice must be the dual of a Liouvillean preset. The left side is a lower
    bound: either the two spike terms +-xi^(n), or the truncated diffraction sum
    when t_n <= diffraction_t_max.
    """
    data, is_dual = dio.liouville_data_of(lattice)
    if data is None or not is_dual:
        raise VarianceError("lattice must be the dual of a Liouvillean preset")
    r_exact = Fraction(str(r)) if not isinstance(r, Fraction) else r
    if not r_exact > 0:
        raise VarianceError("r must be positive")
    r_f = float(r_exact)
    if split.d_left > 1:
        if upsilon is None or upsilon.dim != split.d_left - 1:
            raise VarianceError("upsilon must be a box of dimension d_left - 1")
        window = geo.Box([0.0, *upsilon.center], [r_f, *upsilon.halfwidths])
        vol_u = geo.volume(upsilon)
    else:
        window = geo.Box([0.0], [r_f])
        vol_u = 1.0
    with mpmath.workdps(50):
        return _spike_rows(lattice, split, search, window, vol_u, r_exact, data,
                           divergence_gauge(f_power), f_power, diffraction_t_max, tolerance)


def exact_sin2(frac: Fraction):
    """sin^2(2 pi x) for a rational x in [0, 1); exactly 0 at 0 and 1/2."""
    if frac in (0, Fraction(1, 2)):
        return mpmath.mpf(0)
    return mpmath.sin(2 * mpmath.pi * mpmath.mpf(frac.numerator) / frac.denominator) ** 2


def _spike_rows(lattice, split, search, window, vol_u, r_exact, data, f, f_power,
                diffraction_t_max, tolerance):
    psi = data.psi
    a = data.a_fraction
    covol = mpmath.mpf(1) / abs(mpmath.mpf(a.numerator) / a.denominator - 1)  # covol of Gamma
    vol_s = geo.volume(search)
    e_down = np.zeros(split.d_down)
    e_down[0] = 1.0
    f_down = abs(hm.fourier_indicator(search, e_down)) ** 2
    cs = list(data.exponents) + [data.next_exponent]
    rows = []
    for n, (q, m) in enumerate(zip(data.q, data.m), start=1):
        k = q - m
        frac = (r_exact * k) % 1
        sin2 = exact_sin2(frac)
        d_float = data.distance_approx(n)
        if d_float > 0:
            log2_t = -math.log2(d_float)
        else:
            log2_t = float(cs[n] - cs[n - 1])  # ||q_n a|| = 2^(c_n - c_{n+1}) (1 + tiny)
        log_t = mpmath.mpf(log2_t) * mpmath.log(2)
        f_t = f(mpmath.exp(log_t)) if log2_t < 1000 else (log_t ** f_power)
        rhs = f_t * vol_s**2 * vol_u**2 * sin2 / (4 * mpmath.pi**2 * covol**2)
        t = 1 / d_float if d_float > 0 and d_float > 1e-300 else None
        lhs_spike = lhs_diff = holds = None
        if t is not None:
            e_left = np.zeros(split.d_left)
            e_left[0] = float(k)
            f_left = abs(hm.fourier_indicator(window, e_left)) ** 2
            psi_t = _log_psi(psi, log_t)
            spike = 2 * f_down * f_left / covol**2
            lhs_spike = psi_t**2 * f_t * spike
            best = lhs_spike
            if t <= diffraction_t_max:
                nv = nv_diffraction(lattice, split, search, window, t, tolerance)
                lhs_diff = psi_t**2 * f_t * nv.value / mpmath.mpf(t) ** (2 * split.d_down)
                best = max(best, lhs_diff)
            holds = bool(best >= rhs)
            lhs_spike = float(lhs_spike)
            lhs_diff = None if lhs_diff is None else float(lhs_diff)
        rows.append(SpikeRow(n, log2_t, t, int(k), frac, float(sin2), mpmath.nstr(rhs, 15),
                             lhs_spike, lhs_diff, holds))
    return rows
