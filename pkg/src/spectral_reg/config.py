"""Strict JSON experiment configuration and named matrix generators.

A config is a JSON object. Every key must be known and used by the chosen
command; duplicate keys are an error. Validation collects all violations
before raising :class:`ConfigError`.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .ensembles import RngSpec, sample_complex_ginibre
from .matrix_core import MatrixError, load_matrix, operator_norm
from .regions import Disk, Rect, Region, region_from_dict
from .regularizer import jordan_block

COMMANDS = (
    "pseudospectrum", "regularize", "verify-theorem-b", "tails", "jordan-scan",
    "bulk-profile", "sde-couple", "sde-marginal", "optimize-st",
)
TAIL_LAWS = ("smin-law", "s1-tail", "small-ball", "sst-real")

_COMMON = {"command", "seed", "stream", "out", "workers"}
COMMAND_FIELDS = {
    "pseudospectrum": {"matrix", "region", "nx", "ny", "levels", "perturbation",
                       "limiting_area", "area_resolution", "limit_tolerance"},
    "regularize": {"matrix", "delta", "epsilon", "trials", "attempts", "min_certified"},
    "verify-theorem-b": {"matrix", "delta", "region", "trials"},
    "tails": {"law", "n", "matrix", "delta", "grid", "trials", "min_fraction"},
    "jordan-scan": {"n", "deltas", "trials", "slope_range"},
    "bulk-profile": {"n", "trials", "r_edges", "check_radii", "profile_tolerance", "min_total"},
    "sde-couple": {"sigma1", "sigma2", "t", "steps", "trials", "variant", "normalized", "squared"},
    "sde-marginal": {"matrix", "t", "trials", "steps", "variant", "alpha", "normalized", "squared"},
    "optimize-st": set(),
}
REQUIRED = {
    "pseudospectrum": {"matrix", "levels"},
    "regularize": {"matrix"},
    "verify-theorem-b": {"matrix", "delta"},
    "tails": {"law", "grid"},
    "jordan-scan": {"n"},
    "bulk-profile": {"n"},
    "sde-couple": {"sigma1", "sigma2", "t", "variant"},
    "sde-marginal": {"matrix", "t", "variant"},
    "optimize-st": set(),
}
# defaults that differ between commands
COMMAND_DEFAULTS = {
    "sde-couple": {"steps": 10000},
    "sde-marginal": {"steps": 1000, "trials": 2000},
    "tails": {"trials": 100000},
    "verify-theorem-b": {"trials": 2000, "region": {"disk": {"center": [0.0, 0.0], "radius": 2.0}}},
    "jordan-scan": {"trials": 50, "deltas": [1e-1, 1e-2, 1e-3, 1e-4]},
}


class ConfigError(ValueError):
    """Invalid configuration; ``violations`` lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class ExperimentConfig:
    command: str
    seed: int = 0
    stream: int = 0
    out: str | None = None
    workers: int | None = None
    matrix: str | None = None
    region: dict | None = None
    nx: int = 200
    ny: int = 200
    levels: list[float] | None = None
    perturbation: float = 0.0
    limiting_area: bool = False
    area_resolution: int = 64
    limit_tolerance: float = 0.05
    delta: float | None = None
    epsilon: float | None = None
    deltas: list[float] | None = None
    trials: int = 100
    attempts: int = 100
    min_certified: float = 0.99
    law: str | None = None
    n: int | None = None
    grid: list[float] | None = None
    min_fraction: float = 0.9
    slope_range: list[float] = field(default_factory=lambda: [0.60, 1.05])
    r_edges: list[float] = field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    check_radii: list[float] = field(default_factory=lambda: [0.1, 0.5])
    profile_tolerance: float = 0.12
    min_total: float = 0.15
    sigma1: list[float] | None = None
    sigma2: list[float] | None = None
    t: float | None = None
    steps: int = 1000
    variant: str | None = None
    normalized: bool = True
    squared: bool = True
    alpha: float = 0.01
    base_dir: str = field(default=".", repr=False, compare=False)

    @property
    def rng(self) -> RngSpec:
        return RngSpec(self.seed, self.stream)

    def region_obj(self) -> Region | None:
        return None if self.region is None else region_from_dict(self.region)

    def to_dict(self) -> dict:
        """Echo of every field relevant to the command (defaults filled in, unset fields omitted)."""
        keep = _COMMON | COMMAND_FIELDS[self.command]
        d = asdict(self)
        src = d.get("matrix")
        if src and src.startswith("file:") and not Path(src[5:]).is_absolute():
            d["matrix"] = "file:" + str((Path(self.base_dir) / src[5:]).resolve())
        return {k: d[k] for k in sorted(keep)
                if k in d and d[k] is not None and k not in ("out", "workers")}


_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)} - {"base_dir"}


def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError([f"duplicate key {k!r}"])
        out[k] = v
    return out


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _num_list(v):
    return isinstance(v, list) and len(v) > 0 and all(_is_num(x) for x in v)


def _validate(d: dict) -> list[str]:
    errs = []

    def check(name, ok, msg):
        if name in d and not ok(d[name]):
            errs.append(f"{name}: {msg}, got {d[name]!r}")

    check("seed", lambda v: _is_int(v) and 0 <= v < 2**64, "must be an unsigned 64-bit integer")
    check("stream", lambda v: _is_int(v) and 0 <= v < 2**64, "must be an unsigned 64-bit integer")
    check("out", lambda v: isinstance(v, str), "must be a string")
    check("workers", lambda v: _is_int(v) and v >= 1, "must be a positive integer")
    check("matrix", lambda v: isinstance(v, str), "must be a matrix source string")
    check("nx", lambda v: _is_int(v) and v >= 2, "must be an integer >= 2")
    check("ny", lambda v: _is_int(v) and v >= 2, "must be an integer >= 2")
    check("levels", lambda v: _num_list(v) and all(x > 0 for x in v), "must be a list of positive numbers")
    check("perturbation", lambda v: _is_num(v) and v >= 0, "must be nonnegative")
    check("limiting_area", lambda v: isinstance(v, bool), "must be a boolean")
    check("area_resolution", lambda v: _is_int(v) and v >= 4, "must be an integer >= 4")
    check("limit_tolerance", lambda v: _is_num(v) and v > 0, "must be positive")
    check("delta", lambda v: _is_num(v) and 0 < v < 1, "must lie in (0, 1)")
    check("epsilon", lambda v: _is_num(v) and 0 < v < 1, "must lie in (0, 1)")
    check("deltas", lambda v: _num_list(v) and all(0 < x < 1 for x in v), "must be a list in (0, 1)")
    check("trials", lambda v: _is_int(v) and v >= 1, "must be a positive integer")
    check("attempts", lambda v: _is_int(v) and v >= 1, "must be a positive integer")
    check("min_certified", lambda v: _is_num(v) and 0 <= v <= 1, "must lie in [0, 1]")
    check("law", lambda v: v in TAIL_LAWS, f"must be one of {list(TAIL_LAWS)}")
    check("n", lambda v: _is_int(v) and v >= 1, "must be a positive integer")
    check("grid", lambda v: _num_list(v) and all(x >= 0 for x in v), "must be a list of nonnegative numbers")
    check("min_fraction", lambda v: _is_num(v) and 0 <= v <= 1, "must lie in [0, 1]")
    check("slope_range", lambda v: _num_list(v) and len(v) == 2 and v[0] <= v[1], "must be [lo, hi]")
    check("r_edges", lambda v: _num_list(v) and len(v) >= 2 and all(b > a for a, b in zip(v, v[1:]))
          and v[0] >= 0, "must be increasing nonnegative bin edges")
    check("check_radii", lambda v: _num_list(v), "must be a list of numbers")
    check("profile_tolerance", lambda v: _is_num(v) and v > 0, "must be positive")
    check("min_total", lambda v: _is_num(v), "must be a number")
    for name in ("sigma1", "sigma2"):
        check(name, lambda v: _num_list(v) and all(x >= 0 for x in v), "must be a list of nonnegative numbers")
    check("t", lambda v: _is_num(v) and v >= 0, "must be nonnegative")
    check("steps", lambda v: _is_int(v) and v >= 1, "must be a positive integer")
    check("variant", lambda v: v in ("complex", "real"), "must be 'complex' or 'real'")
    check("normalized", lambda v: isinstance(v, bool), "must be a boolean")
    check("squared", lambda v: isinstance(v, bool), "must be a boolean")
    check("alpha", lambda v: _is_num(v) and 0 < v < 1, "must lie in (0, 1)")
    if "region" in d:
        try:
            region_from_dict(d["region"])
        except (ValueError, TypeError, KeyError) as exc:
            errs.append(f"region: {exc}")
    if "matrix" in d and isinstance(d["matrix"], str):
        try:
            parse_matrix_source(d["matrix"], check_only=True)
        except ValueError as exc:
            errs.append(f"matrix: {exc}")
    return errs


def parse_config(text: str, command: str | None = None, base_dir: str | Path = ".") -> ExperimentConfig:
    """Parse and validate a JSON config.

    ``command`` (from the command line) fills in or must agree with the
    config's ``command`` key. Relative matrix file paths resolve against
    ``base_dir``.
    """
    try:
        raw = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"invalid JSON: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    errs = []
    if command is not None:
        if "command" in raw and raw["command"] != command:
            errs.append(f"command: config says {raw['command']!r} but {command!r} was requested")
        raw.setdefault("command", command)
    cmd = raw.get("command")
    if cmd is None:
        raise ConfigError(errs + ["command: missing"])
    if cmd not in COMMANDS:
        raise ConfigError(errs + [f"command: unknown command {cmd!r}"])
    allowed = _COMMON | COMMAND_FIELDS[cmd]
    for k in raw:
        if k not in _FIELD_NAMES:
            errs.append(f"{k}: unknown field")
        elif k not in allowed:
            errs.append(f"{k}: not used by command {cmd!r}")
    for k in sorted(REQUIRED[cmd] - raw.keys()):
        errs.append(f"{k}: required by command {cmd!r}")
    errs += _validate(raw)
    if cmd == "regularize" and ("delta" in raw) == ("epsilon" in raw):
        errs.append("delta/epsilon: give exactly one")
    if cmd == "sde-couple":
        s1, s2 = raw.get("sigma1"), raw.get("sigma2")
        if _num_list(s1) and _num_list(s2) and len(s1) != len(s2):
            errs.append("sigma1/sigma2: lengths differ")
    if cmd == "tails" and raw.get("law") in ("small-ball", "sst-real") and "matrix" not in raw:
        errs.append(f"matrix: required by law {raw['law']!r}")
    if cmd == "tails" and raw.get("law") == "small-ball" and "delta" not in raw:
        errs.append("delta: required by law 'small-ball'")
    if cmd == "tails" and raw.get("law") in ("smin-law", "s1-tail") and "n" not in raw:
        errs.append(f"n: required by law {raw['law']!r}")
    if errs:
        raise ConfigError(errs)
    values = dict(COMMAND_DEFAULTS.get(cmd, {}))
    values.update(raw)
    return ExperimentConfig(**values, base_dir=str(base_dir))


# ---------------------------------------------------------------------------
# matrix sources

_NAMED = re.compile(r"^\s*([a-z-]+)\s*\((.*)\)\s*$")


def toeplitz_sample(n: int, seed: int) -> np.ndarray:
    """Upper triangular Toeplitz matrix, zero diagonal, ``N(0, 1)`` superdiagonals.

    Offset ``k = 1, ..., n - 1`` takes the ``k``-th standard normal from a
    Philox stream seeded with ``seed``.
    """
    g = RngSpec(seed).generator()
    vals = g.standard_normal(n - 1)
    t = np.zeros((n, n), dtype=np.complex128)
    for k in range(1, n):
        t[np.arange(n - k), np.arange(k, n)] = vals[k - 1]
    return t


def random_unit_norm(n: int, seed: int) -> np.ndarray:
    """Complex Ginibre sample scaled to operator norm one."""
    g = sample_complex_ginibre(n, RngSpec(seed).generator())
    return g / operator_norm(g)


def _int_args(args, count, name):
    parts = [p.strip() for p in args.split(",")] if args.strip() else []
    if len(parts) != count or not all(re.fullmatch(r"\d+", p) for p in parts):
        raise ValueError(f"{name} takes {count} nonnegative integer argument(s)")
    vals = [int(p) for p in parts]
    if vals[0] < 1:
        raise ValueError(f"{name}: size must be positive")
    return vals


def parse_matrix_source(spec: str, base_dir: str | Path = ".", check_only: bool = False):
    """Build a matrix from ``jordan(n)``, ``zero(n)``, ``diag(a, b, ...)``,
    ``toeplitz-sample(n, seed)``, ``random-unit-norm(n, seed)`` or
    ``file:<path>``.
    """
    if spec.startswith("file:"):
        path = Path(spec[5:])
        if not path.is_absolute():
            path = Path(base_dir) / path
        if check_only:
            return None
        try:
            return load_matrix(path)
        except (OSError, MatrixError) as exc:
            raise ValueError(f"cannot load {path}: {exc}") from None
    m = _NAMED.match(spec)
    if not m:
        raise ValueError(f"unrecognized matrix source {spec!r}")
    name, args = m.groups()
    if name == "jordan":
        (n,) = _int_args(args, 1, name)
        return None if check_only else jordan_block(n)
    if name == "zero":
        (n,) = _int_args(args, 1, name)
        return None if check_only else np.zeros((n, n), dtype=np.complex128)
    if name == "diag":
        try:
            vals = [complex(p.strip().replace(" ", "")) for p in args.split(",")]
        except ValueError:
            raise ValueError("diag takes a comma-separated list of numbers") from None
        return None if check_only else np.diag(np.array(vals, dtype=np.complex128))
    if name == "toeplitz-sample":
        n, seed = _int_args(args, 2, name)
        return None if check_only else toeplitz_sample(n, seed)
    if name == "random-unit-norm":
        n, seed = _int_args(args, 2, name)
        return None if check_only else random_unit_norm(n, seed)
    raise ValueError(f"unknown matrix generator {name!r}")


def default_view(norm: float, levels) -> Rect:
    """Square centred at the origin containing the ``eps``-pseudospectra of
    any matrix with operator norm at most ``norm``."""
    r = norm + max(levels)
    r = r if r > 0 else 1.0
    return Rect(complex(-r, -r), complex(r, r))


__all__ = [
    "COMMANDS", "ConfigError", "ExperimentConfig", "parse_config", "parse_matrix_source",
    "toeplitz_sample", "random_unit_norm", "default_view", "Disk", "Rect",
]
