"""JSON experiment configuration with strict keys and field-path errors."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import geometry as geo
from . import lattice as lat
from .diophantine import DiophantineError, PsiFunction
from .modelset import ModelSetError, ModelSetSpec

KEYS = {"description", "split", "lattice", "shift", "window", "search", "psi", "seed",
        "tolerance", "t_grid", "samples"}
REQUIRED = {"split", "lattice", "window", "search"}


class ConfigError(ValueError):
    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}" if path else reason)


@dataclass(frozen=True)
class ExperimentConfig:
    spec: ModelSetSpec
    psi: Optional[PsiFunction]
    seed: int
    tolerance: float
    t_grid: tuple
    samples: int
    description: str = ""

    @property
    def split(self):
        return self.spec.split


def _number(obj, path, integer=False):
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise ConfigError(path, "expected a number")
    if integer and not isinstance(obj, int):
        raise ConfigError(path, "expected an integer")
    return obj


def _sub(path, key):
    return f"{path}.{key}" if path else key


def _wrap(path, fn, *args):
    try:
        return fn(*args)
    except (geo.GeometryError, lat.LatticeError, DiophantineError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None


def from_dict(obj) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("", "config must be a JSON object")
    extra = sorted(set(obj) - KEYS)
    if extra:
        raise ConfigError(extra[0], "unknown key")
    for k in sorted(REQUIRED - set(obj)):
        raise ConfigError(k, "missing required key")

    sp = obj["split"]
    if not isinstance(sp, dict) or set(sp) != {"d_down", "d_left"}:
        raise ConfigError("split", "expected {d_down, d_left}")
    d0 = _number(sp["d_down"], "split.d_down", integer=True)
    d1 = _number(sp["d_left"], "split.d_left", integer=True)
    split = _wrap("split", geo.SplitSpace, d0, d1)

    lattice = _wrap("lattice", lat.lattice_from_json, obj["lattice"])
    window = _wrap("window", geo.region_from_json, obj["window"])
    search = _wrap("search", geo.region_from_json, obj["search"])
    shift = obj.get("shift")
    if shift is not None:
        if not isinstance(shift, list):
            raise ConfigError("shift", "expected a list")
        shift = [_number(v, f"shift[{i}]") for i, v in enumerate(shift)]
    psi = _wrap("psi", PsiFunction.from_json, obj["psi"]) if "psi" in obj else None

    seed = _number(obj.get("seed", 0), "seed", integer=True)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    tol = _number(obj.get("tolerance", 1e-3), "tolerance")
    if not tol > 0:
        raise ConfigError("tolerance", "must be positive")
    t_grid = obj.get("t_grid", [])
    if not isinstance(t_grid, list):
        raise ConfigError("t_grid", "expected a list")
    t_grid = tuple(float(_number(v, f"t_grid[{i}]")) for i, v in enumerate(t_grid))
    for i, t in enumerate(t_grid):
        if not t > 0:
            raise ConfigError(f"t_grid[{i}]", "must be positive")
    samples = _number(obj.get("samples", 10_000), "samples", integer=True)
    if samples < 100:
        raise ConfigError("samples", "need at least 100")
    desc = obj.get("description", "")
    if not isinstance(desc, str):
        raise ConfigError("description", "expected a string")

    try:
        spec = ModelSetSpec(split, lattice, shift, window, search)
    except ModelSetError as exc:
        msg = str(exc)
        path = ("lattice" if "lattice" in msg else "shift" if "shift" in msg
                else "window" if "window" in msg else "search" if "search" in msg else "")
        raise ConfigError(path, msg) from None
    return ExperimentConfig(spec, psi, seed, float(tol), t_grid, samples, desc)


def load(path) -> ExperimentConfig:
    """Load a config file; bare names like 'golden' refer to the bundled presets."""
    p = Path(path)
    if not p.exists() and not p.suffix and p.name in bundled():
        return from_dict(json.loads(resources.files(__package__).joinpath(
            f"configs/{p.name}.json").read_text()))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return from_dict(obj)


def bundled() -> list:
    d = resources.files(__package__).joinpath("configs")
    return sorted(f.name[:-5] for f in d.iterdir() if f.name.endswith(".json"))


def to_dict(cfg: ExperimentConfig) -> dict:
    spec = cfg.spec
    out = {
        "split": {"d_down": spec.split.d_down, "d_left": spec.split.d_left},
        "lattice": {"basis": np.asarray(spec.lattice.basis).tolist()},
        "shift": list(spec.shift),
        "window": geo.region_to_json(spec.window),
        "search": geo.region_to_json(spec.search),
        "seed": cfg.seed,
        "tolerance": cfg.tolerance,
        "t_grid": list(cfg.t_grid),
        "samples": cfg.samples,
    }
    if cfg.psi is not None:
        out["psi"] = cfg.psi.to_json()
    if cfg.description:
        out["description"] = cfg.description
    return out
