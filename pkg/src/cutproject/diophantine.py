"""Gauges psi, repellence profiles, irrationality scans and Liouville data.

The Liouville construction never touches floating point for anything
that is verified: exponents are Python integers and every inequality is
decided with outward-rounded interval arithmetic (``mpmath.iv``) at a
precision large enough to separate the two sides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from mpmath import iv
from mpmath.libmp import mpf_ceil, mpf_cmp, to_int

from . import geometry as geo
from . import lattice as lat

DEFAULT_BIT_BUDGET = 2**32
MAX_WORKING_PRECISION = 1 << 20


class DiophantineError(ValueError):
    pass


@dataclass(frozen=True)
class PsiFunction:
    """psi(r) = c r^mu (kind 'power') or c log(1+r)^beta (kind 'log')."""

    kind: str
    c: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in ("power", "log"):
            raise DiophantineError(f"unknown psi type {self.kind!r}")
        if not (self.c > 0 and self.exponent > 0):
            raise DiophantineError("psi parameters must be positive")

    @classmethod
    def power(cls, c=1.0, mu=1.0):
        return cls("power", float(c), float(mu))

    @classmethod
    def log(cls, c=1.0, beta=1.0):
        return cls("log", float(c), float(beta))

    @property
    def growth_class(self) -> str:
        return "speed" if self.kind == "power" else "slow"

    @property
    def mu(self) -> Optional[float]:
        return self.exponent if self.kind == "power" else None

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "power":
            out = self.c * r**self.exponent
        else:
            out = self.c * np.log1p(r) ** self.exponent
        return out if out.ndim else float(out)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "power":
            out = (y / self.c) ** (1 / self.exponent)
        else:
            out = np.expm1((y / self.c) ** (1 / self.exponent))
        return out if out.ndim else float(out)

    # interval versions used by the exact checks
    def _iv_log2_inverse_pow2(self, k: int):
        """Interval for log2 psi^-1(2^k)."""
        ln2 = iv.log(2)
        c = iv.mpf(self.c)
        e = iv.mpf(self.exponent)
        if self.kind == "power":
            return (k - iv.log(c) / ln2) / e
        z = iv.exp((k * ln2 - iv.log(c)) / e)  # (2^k / c)^(1/beta)
        return z / ln2 + iv.log(1 - iv.exp(-z)) / ln2

    def _iv_margin(self, g: int, k: int):
        """Interval lower-bounding log psi(2^g) - log 2^k."""
        ln2 = iv.log(2)
        c = iv.mpf(self.c)
        if self.kind == "power":
            coef = Fraction(self.exponent) * g - k  # exact
            return iv.log(c) + iv.mpf(coef.numerator) / coef.denominator * ln2
        # log(1 + 2^g) > g log 2
        return iv.log(c) + iv.mpf(self.exponent) * iv.log(g * ln2) - k * ln2

    def to_json(self) -> dict:
        key = "mu" if self.kind == "power" else "beta"
        return {"type": self.kind, "params": {"c": self.c, key: self.exponent}}

    @classmethod
    def from_json(cls, obj: dict) -> "PsiFunction":
        if not isinstance(obj, dict) or set(obj) - {"type", "params"}:
            raise DiophantineError("psi must be {type, params}")
        kind = obj.get("type")
        params = dict(obj.get("params") or {})
        key = {"power": "mu", "log": "beta"}.get(kind)
        if key is None:
            raise DiophantineError(f"unknown psi type {kind!r}")
        extra = set(params) - {"c", key}
        if extra:
            raise DiophantineError(f"unknown psi parameter(s) {sorted(extra)}")
        return cls(kind, float(params.get("c", 1.0)), float(params.get(key, 1.0)))


# -- interval helpers --------------------------------------------------------

class _prec:
    def __init__(self, bits):
        self.bits = bits

    def __enter__(self):
        self.old = iv.prec
        iv.prec = self.bits

    def __exit__(self, *exc):
        iv.prec = self.old


def _ceil_exact(fn, min_bits: int) -> int:
    """Ceiling of the real number enclosed by fn() at growing precision."""
    bits = max(128, min_bits)
    while bits <= MAX_WORKING_PRECISION:
        with _prec(bits):
            x = fn()
            a, b = x._mpi_
            ca, cb = int(to_int(mpf_ceil(a))), int(to_int(mpf_ceil(b)))
            if ca == cb:
                return ca
            # the interval may be a point sitting exactly on an integer
            if mpf_cmp(a, b) == 0:
                return ca
        bits *= 2
    raise lat.BudgetError("working precision exceeded while resolving a ceiling")


def _certainly_ge(fn, min_bits: int) -> bool:
    """True if the interval fn() = (lhs - rhs) is certainly >= 0."""
    bits = max(128, min_bits)
    while bits <= MAX_WORKING_PRECISION:
        with _prec(bits):
            x = fn()
            a, b = x._mpi_
            if mpf_cmp(a, (0, 0, 0, 0)) >= 0:
                return True
            if mpf_cmp(b, (0, 0, 0, 0)) < 0:
                return False
        bits *= 2
    return False


# -- Liouville numbers -------------------------------------------------------

@dataclass(frozen=True)
class LiouvilleData:
    """a = sum_j 2^(-c_j); stores c_1..c_depth and the next exponent."""

    exponents: tuple
    next_exponent: int
    psi: PsiFunction
    verified: bool = field(default=False, compare=False)

    @property
    def depth(self) -> int:
        return len(self.exponents)

    @property
    def q(self) -> list:
        return [1 << c for c in self.exponents]

    @property
    def m(self) -> list:
        out = []
        for n, cn in enumerate(self.exponents):
            out.append(sum(1 << (cn - cj) for cj in self.exponents[: n + 1]))
        return out

    @property
    def a_fraction(self) -> Fraction:
        """The truncation sum_{j <= depth} 2^(-c_j), exactly."""
        return sum((Fraction(1, 1 << c) for c in self.exponents), Fraction(0))

    @property
    def a_approx(self) -> float:
        return float(sum((Fraction(1, 1 << c) for c in self.exponents if c < 1100), Fraction(0)))

    def distance_bound_exponent(self, n: int) -> int:
        """e with ||q_n a|| <= 2^e (n is 1-based)."""
        cs = list(self.exponents) + [self.next_exponent]
        return cs[n - 1] - cs[n] + 1

    def distance_approx(self, n: int) -> float:
        """Float value of ||q_n a|| using the terms known here (0.0 on underflow)."""
        cs = list(self.exponents) + [self.next_exponent]
        cn = cs[n - 1]
        return float(sum(math.ldexp(1.0, cn - cj) if cj - cn < 1075 else 0.0 for cj in cs[n:]))

    def verify(self) -> bool:
        return verify_liouville(self)

    def to_json(self) -> dict:
        return {
            "psi": self.psi.to_json(),
            "c_n": [str(c) for c in self.exponents],
            "next_exponent": str(self.next_exponent),
            "q_n": [str(q) for q in self.q],
            "m_n": [str(m) for m in self.m],
            "a_approx": self.a_approx,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LiouvilleData":
        data = cls(tuple(int(c) for c in obj["c_n"]), int(obj["next_exponent"]),
                   PsiFunction.from_json(obj["psi"]))
        if "q_n" in obj and [int(x) for x in obj["q_n"]] != data.q:
            raise DiophantineError("q_n inconsistent with c_n")
        if "m_n" in obj and [int(x) for x in obj["m_n"]] != data.m:
            raise DiophantineError("m_n inconsistent with c_n")
        if not verify_liouville(data):
            raise DiophantineError("Liouville data failed verification")
        return cls(data.exponents, data.next_exponent, data.psi, True)


def _next_exponent(psi: PsiFunction, ck: int) -> int:
    bits = 64 + 2 * max(ck, 1).bit_length() + (ck if psi.kind == "log" else 0)
    step = _ceil_exact(lambda: psi._iv_log2_inverse_pow2(ck), bits)
    return int(ck + max(step, 0) + 1)


def verify_liouville(data: LiouvilleData) -> bool:
    """Exact check of psi(||q_n a||^-1) >= q_n for every stored n.

    Uses ||q_n a|| <= 2^(c_n - c_{n+1} + 1) (needs gaps >= 2, checked) and
    monotonicity of psi, so it suffices that psi(2^g) >= 2^(c_n) with
    g = c_{n+1} - c_n - 1.
    """
    cs = list(data.exponents) + [data.next_exponent]
    if cs[0] < 1:
        return False
    psi = data.psi
    for n in range(data.depth):
        cn, cn1 = cs[n], cs[n + 1]
        g = cn1 - cn - 1
        if g < 1:
            return False
        bits = 64 + 2 * max(cn, g).bit_length() + (cn if psi.kind == "log" else 0)
        ok = _certainly_ge(lambda: psi._iv_margin(g, cn), bits)
        if not ok:
            return False
    # the recurrence itself must reproduce the stored exponents
    for n in range(data.depth):
        if _next_exponent(psi, cs[n]) != cs[n + 1]:
            return False
    return True


def liouville_number(psi: PsiFunction, depth: int, c1: int = 1,
                     bit_budget: int = DEFAULT_BIT_BUDGET) -> LiouvilleData:
    if depth < 1:
        raise DiophantineError("depth must be >= 1")
    cs = [int(c1)]
    while len(cs) <= depth:
        if cs[-1] > bit_budget:
            raise lat.BudgetError(f"exponent c_{len(cs)} = {cs[-1]} exceeds bit budget {bit_budget}")
        cs.append(_next_exponent(psi, cs[-1]))
    data = LiouvilleData(tuple(cs[:depth]), cs[depth], psi)
    if not verify_liouville(data):
        raise DiophantineError("constructed Liouville data failed exact verification")
    return LiouvilleData(data.exponents, data.next_exponent, psi, True)


@dataclass(frozen=True)
class Witness:
    """xi^(n) = q_n (a e_down + e_left) - m_n (e_down + e_left)."""

    n: int
    coords: tuple  # exact integers in the lattice basis
    down_exact_bound_exp: int  # |xi_down| <= 2^this
    down_approx: float  # float |xi_down| (0.0 if it underflows)
    left_exact: int  # |xi_left| = q_n - m_n


def liouville_witnesses(data: LiouvilleData, d: int = 2) -> list:
    out = []
    for n, (q, m) in enumerate(zip(data.q, data.m), start=1):
        coords = (q, -m) + (0,) * (d - 2)
        out.append(Witness(n, coords, data.distance_bound_exponent(n),
                           data.distance_approx(n), q - m))
    return out


def verify_witnesses(data: LiouvilleData, witnesses) -> bool:
    """The three defining conditions, decided with integers and intervals."""
    if not data.verify():
        return False
    prev_left = 0
    cs = list(data.exponents) + [data.next_exponent]
    for w in witnesses:
        n = w.n
        # |xi_left| grows, |xi_down| shrinks: 2^(c_n-c_{n+1}+1) < 2^(c_{n-1}-c_n)
        if w.left_exact <= prev_left:
            return False
        if n >= 2 and not (cs[n - 1] - cs[n] + 1 < cs[n - 2] - cs[n - 1]):
            return False
        # |xi_left| = q_n - m_n < q_n <= psi(||q_n a||^-1)
        if not 0 < w.left_exact < (1 << cs[n - 1]):
            return False
        prev_left = w.left_exact
    return True


def liouvillean_lattice(psi: PsiFunction, depth: int, split: geo.SplitSpace,
                        tail_lattice: Optional[lat.Lattice] = None, c1: int = 1):
    """Lattice spanned by a e_down + e_left, e_down + e_left and a tail lattice."""
    data = liouville_number(psi, depth, c1)
    d = split.d
    if tail_lattice is None:
        tail_lattice = lat.identity(d - 2) if d > 2 else None
    if d > 2 and (tail_lattice is None or tail_lattice.dim != d - 2):
        raise DiophantineError("tail lattice must have dimension d - 2")
    ed, el = 0, split.d_down
    basis = np.zeros((d, d))
    a = data.a_approx
    basis[ed, 0], basis[el, 0] = a, 1.0
    basis[ed, 1], basis[el, 1] = 1.0, 1.0
    rest = [i for i in range(d) if i not in (ed, el)]
    for j in range(d - 2):
        basis[rest, 2 + j] = tail_lattice.basis[:, j]
    L = lat.Lattice(basis, exact_tag=data)
    wits = liouville_witnesses(data, d)
    if not verify_witnesses(data, wits):
        raise DiophantineError("witness verification failed")
    return L, wits


def liouville_preset(psi=None, depth: int = 3, d_down: int = 1, d_left: int = 1,
                     role: str = "dual", c1: int = 1) -> lat.Lattice:
    """Preset lattice; role 'dual' gives the lattice whose dual is Liouvillean."""
    psi = PsiFunction.log() if psi is None else (
        psi if isinstance(psi, PsiFunction) else PsiFunction.from_json(psi))
    L, _ = liouvillean_lattice(psi, int(depth), geo.SplitSpace(int(d_down), int(d_left)), c1=int(c1))
    if role == "primal":
        return L
    if role != "dual":
        raise DiophantineError(f"unknown role {role!r}")
    D = lat.dual(L)
    return lat.Lattice(D.basis, exact_tag=("dual", L.exact_tag))


def liouville_data_of(lattice: lat.Lattice):
    """(LiouvilleData, is_dual) carried by a preset lattice, or (None, False)."""
    tag = lattice.exact_tag
    if isinstance(tag, LiouvilleData):
        return tag, False
    if isinstance(tag, tuple) and len(tag) == 2 and tag[0] == "dual" and isinstance(tag[1], LiouvilleData):
        return tag[1], True
    return None, False


# -- repellence -----------------------------------------------------------------

@dataclass
class RepellenceProfile:
    epsilons: np.ndarray
    min_left: np.ndarray
    witnesses: list  # integer coordinate tuples (None if no candidate)
    search_radius: float
    degenerate: list = field(default_factory=list)  # coords with gamma_down = 0


def _ball_points(lattice, radius):
    region = geo.Ball(np.zeros(lattice.dim), radius * (1 + 1e-12))
    pts = lat.enumerate_in(lattice, region)
    nz = np.any(pts.coords != 0, axis=1)
    return pts.coords[nz], pts.points[nz]


def repellence_profile(lattice, split: geo.SplitSpace, epsilons: Sequence[float],
                       search_radius: float, zero_tol: float = 1e-12) -> RepellenceProfile:
    """min |gamma_left| over 0 < |gamma_down| <= eps, |gamma| <= search_radius.

    Vectors with gamma_down = 0 violate repellence at every scale; they are
    reported with min_left = 0 at every epsilon.
    """
    eps = np.asarray(epsilons, dtype=float)
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise DiophantineError("epsilons must be positive and strictly decreasing")
    coords, pts = _ball_points(lattice, search_radius)
    dn = np.linalg.norm(split.down(pts), axis=1)
    lf = np.linalg.norm(split.left(pts), axis=1)
    scale = np.maximum(1.0, np.linalg.norm(pts, axis=1))
    degen = dn <= zero_tol * scale
    dorder = np.argsort(lf[degen], kind="stable")
    degenerate = [tuple(int(v) for v in k) for k in coords[degen][dorder]]
    keep = ~degen
    dn, lf, coords = dn[keep], lf[keep], coords[keep]
    order = np.lexsort((lf, dn))
    dn, lf, coords = dn[order], lf[order], coords[order]
    run = np.minimum.accumulate(lf) if len(lf) else lf
    arg = np.zeros(len(lf), dtype=np.int64)
    for i in range(1, len(lf)):
        arg[i] = i if lf[i] < run[i - 1] else arg[i - 1]
    min_left = np.full(len(eps), np.inf)
    wit = [None] * len(eps)
    idx = np.searchsorted(dn, eps, side="right") - 1
    for j, i in enumerate(idx):
        if degenerate:
            min_left[j] = 0.0
            wit[j] = degenerate[0]
        elif i >= 0:
            min_left[j] = run[i]
            wit[j] = tuple(int(v) for v in coords[arg[i]])
    return RepellenceProfile(eps, min_left, wit, float(search_radius), degenerate)


def check_repellent(profile: RepellenceProfile, psi: PsiFunction):
    """(holds, worst_margin) with margin = min_eps min_left(eps) / psi(1/eps).

    A certificate only for lattice vectors inside the scanned ball.
    """
    if len(profile.epsilons) == 0:
        raise DiophantineError("empty profile")
    bound = psi(1.0 / profile.epsilons)
    ratio = profile.min_left / bound
    holds = bool(np.all(profile.min_left > bound))
    return holds, float(np.min(ratio))


def irrationality_scan(lattice, split: geo.SplitSpace, search_radius: float, tol: float):
    """Nonzero vectors of the lattice and of its dual lying within tol of E_left.

    Hits in the first list contradict injectivity of the projection to
    E_down; hits in the second contradict density of the projection of
    the lattice to E_left.  A clean scan is evidence within the radius only.
    """
    if not tol > 0:
        raise DiophantineError("tol must be positive")
    out = {"search_radius": float(search_radius), "tol": float(tol)}
    for name, L in (("gamma_hits", lattice), ("dual_hits", lat.dual(lattice))):
        coords, pts = _ball_points(L, search_radius)
        dn = np.linalg.norm(split.down(pts), axis=1)
        out[name] = [tuple(int(v) for v in k) for k in coords[dn < tol]]
    return out


def golden_norm_form(n: int, m: int) -> int:
    """(n + m phi)(n + m phibar) = n^2 + n m - m^2, exactly."""
    return n * n + n * m - m * m


def fibonacci_witnesses(k_max: int):
    """(F_{k+1}, -F_k), k = 1..k_max; each has norm form of modulus 1."""
    F = [0, 1]
    while len(F) < k_max + 2:
        F.append(F[-1] + F[-2])
    return [(F[k + 1], -F[k]) for k in range(1, k_max + 1)]


# -- exponents -----------------------------------------------------------------

def predicted_exponent(d_down: int, d_left: int, s: float, psi: PsiFunction, region_class: str):
    """Discrepancy exponent at delta = 0.

    Power-law psi returns a float e (bound C t^e).  Slowly growing psi
    returns the pair (d_down, -s): bound C t^d_down psi(t)^-s.
    """
    if region_class not in ("ball", "finite-perimeter"):
        raise DiophantineError(f"unknown region class {region_class!r}")
    if psi.growth_class == "slow":
        return (float(d_down), -float(s))
    mu = psi.mu
    if region_class == "ball":
        return d_down - 2 * s * d_down / ((d_down + 1) * (s + 1 / mu) + 2 * d_left)
    return d_down - d_down * s / (d_down * s + d_left + 1 / mu)
