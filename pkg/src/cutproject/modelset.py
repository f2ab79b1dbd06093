"""Cut-and-project sets: points, counts, discrepancy sweeps and exponent fits."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import geometry as geo
from . import lattice as lat


class ModelSetError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSetSpec:
    split: geo.SplitSpace
    lattice: lat.Lattice
    shift: tuple
    window: object
    search: object

    def __post_init__(self):
        shift = np.zeros(self.split.d) if self.shift is None else np.asarray(self.shift, float)
        object.__setattr__(self, "shift", tuple(float(v) for v in np.atleast_1d(shift)))
        if self.lattice.dim != self.split.d:
            raise ModelSetError("lattice dimension does not match the split")
        if len(self.shift) != self.split.d:
            raise ModelSetError("shift has the wrong length")
        if self.window.dim != self.split.d_left:
            raise ModelSetError("window dimension must equal d_left")
        if self.search.dim != self.split.d_down:
            raise ModelSetError("search region dimension must equal d_down")
        if not geo.volume(self.window) > 0:
            raise ModelSetError("window must have positive volume")

    @property
    def shift_vector(self) -> np.ndarray:
        return np.asarray(self.shift)

    @property
    def density(self) -> float:
        """Points per unit volume of E_down."""
        return geo.volume(self.window) / self.lattice.covolume

    def region(self, t: float) -> geo.ProductRegion:
        return geo.ProductRegion(geo.dilate(self.search, t), self.window)

    def replace(self, **kw) -> "ModelSetSpec":
        args = dict(split=self.split, lattice=self.lattice, shift=self.shift,
                    window=self.window, search=self.search)
        args.update(kw)
        return ModelSetSpec(**args)


@dataclass(frozen=True)
class CountReport:
    t: float
    count: int
    main_term: float
    discrepancy: float
    boundary_warnings: int = 0

    def as_row(self):
        return (self.t, self.count, self.main_term, self.discrepancy, self.boundary_warnings)


def main_term(spec: ModelSetSpec, t: float) -> float:
    return (geo.volume(spec.search) * geo.volume(spec.window)
            * t ** spec.split.d_down / spec.lattice.covolume)


def lifts(spec: ModelSetSpec, t: float) -> lat.LatticePointSet:
    """Lattice points gamma with gamma - s in t*search x window."""
    if not t > 0:
        raise ModelSetError("t must be positive")
    return lat.enumerate_in(spec.lattice, spec.region(t), -spec.shift_vector)


def points(spec: ModelSetSpec, t: float) -> np.ndarray:
    """E_down parts of gamma - s for the lifts above, shape (N, d_down)."""
    pts = lifts(spec, t).points
    return spec.split.down(pts - spec.shift_vector)


def count(spec: ModelSetSpec, t: float) -> CountReport:
    res = lifts(spec, t)
    n = len(res)
    mt = main_term(spec, t)
    return CountReport(float(t), n, mt, n - mt, res.boundary_warnings)


def count_fast(spec: ModelSetSpec, t: float, shifts=None) -> np.ndarray:
    """Counts for many shifts at once (no boundary diagnostics)."""
    s = spec.shift_vector[None, :] if shifts is None else np.atleast_2d(shifts)
    return lat.count_in_many(spec.lattice, spec.region(t), -s)


def discrepancy_sweep(spec: ModelSetSpec, t_grid: Sequence[float], threads: int = 1) -> list:
    t_grid = [float(t) for t in t_grid]
    if any(t <= 0 for t in t_grid):
        raise ModelSetError("t values must be positive")
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(lambda t: count(spec, t), t_grid))
    return [count(spec, t) for t in t_grid]


@dataclass(frozen=True)
class ExponentFit:
    estimate: float
    constant: float
    residual: float
    n_used: int
    n_excluded: int
    model: str


def envelope(t, values):
    """Running maximum of |values| in increasing t."""
    t = np.asarray(t, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    order = np.argsort(t, kind="stable")
    return t[order], np.maximum.accumulate(v[order])


def fit_exponent(table, model: str = "power", psi=None, d_down: Optional[int] = None) -> ExponentFit:
    """Least-squares fit of the envelope of |discrepancy| in log coordinates.

    model="power":  |D| <= C t^e, returns e.
    model="psi":    |D| <= C psi(t)^(-s) t^d_down, returns s.
    """
    if isinstance(table, (list, tuple)) and table and isinstance(table[0], CountReport):
        t = np.array([r.t for r in table])
        dv = np.array([r.discrepancy for r in table])
    else:
        t, dv = np.asarray(table, dtype=float)
    used = np.abs(dv) > 0
    excluded = int(np.sum(~used))
    t, env = envelope(t[used], dv[used])
    if len(t) < 5:
        raise ModelSetError(f"need at least 5 rows with nonzero discrepancy, got {len(t)}")
    y = np.log(env)
    if model == "power":
        x = np.log(t)
    elif model == "psi":
        if psi is None or d_down is None:
            raise ModelSetError("model 'psi' needs psi and d_down")
        y = y - d_down * np.log(t)
        x = -np.log(psi(t))
    else:
        raise ModelSetError(f"unknown model {model!r}")
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return ExponentFit(float(coef[0]), float(np.exp(coef[1])),
                       float(np.sqrt(np.mean(resid**2))), len(t), excluded, model)
