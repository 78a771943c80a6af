"""Seeded Ginibre sampling and Monte Carlo checks of singular-value tail laws.

Random streams
--------------
Every generator is ``numpy.random.Generator(Philox(SeedSequence(...)))`` with
entropy ``seed`` and spawn key ``(stream, *key)``. Philox is counter based, and
``Generator.standard_normal`` uses numpy's ziggurat, so a given
``(seed, stream, key)`` reproduces the same doubles on every platform for a
fixed numpy release. Monte Carlo verifiers draw trials in blocks of
:data:`BLOCK` consecutive trial indices; block ``b`` uses key ``(b,)``. The
block layout does not depend on the worker count.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm

from .matrix_core import as_cmatrix

BLOCK = 1000
CONFIDENCE = 0.99


@dataclass(frozen=True)
class RngSpec:
    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v < 2**64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), *map(int, key)))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream: int) -> "RngSpec":
        return RngSpec(self.seed, stream)


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSpec):
        return rng.generator()
    raise TypeError(f"expected RngSpec or numpy Generator, got {type(rng).__name__}")


def sample_complex_ginibre(n: int, rng, size: int | None = None) -> np.ndarray:
    """Complex Ginibre matrix: real and imaginary parts i.i.d. ``N(0, 1/(2n))``.

    Normals are drawn as one array of shape ``(*size, n, n, 2)`` (real part
    first), which fixes the consumption order.
    """
    if n < 1:
        raise ValueError("n must be positive")
    shape = (n, n, 2) if size is None else (size, n, n, 2)
    x = _gen(rng).standard_normal(shape) * math.sqrt(1.0 / (2 * n))
    out = np.empty(shape[:-1], dtype=np.complex128)
    out.real = x[..., 0]
    out.imag = x[..., 1]
    return out


def sample_real_ginibre(n: int, rng, size: int | None = None) -> np.ndarray:
    """Real Ginibre matrix with i.i.d. ``N(0, 1/n)`` entries, as complex dtype."""
    if n < 1:
        raise ValueError("n must be positive")
    shape = (n, n) if size is None else (size, n, n)
    x = _gen(rng).standard_normal(shape) * math.sqrt(1.0 / n)
    return x.astype(np.complex128)


def blocks(trials: int, block: int = BLOCK):
    """Yield ``(block_index, count)`` covering ``trials`` trial indices."""
    for b, start in enumerate(range(0, trials, block)):
        yield b, min(block, trials - start)


def smin_cdf_exact(n: int, eps) -> np.ndarray | float:
    """``P[sigma_n(G_n) < eps] = 1 - exp(-eps^2 n^2)`` for complex Ginibre ``G_n``."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise ValueError("eps must be nonnegative")
    out = -np.expm1(-(eps**2) * n * n)
    return float(out) if out.ndim == 0 else out


def wilson_interval(k, trials: int, confidence: float = CONFIDENCE):
    """Wilson score interval for ``k`` successes out of ``trials``."""
    k = np.asarray(k, dtype=float)
    z = norm.ppf(0.5 + confidence / 2)
    p = k / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # the edges are exactly 0 and 1 at k = 0 and k = trials; pin them against rounding
    lo = np.where(k == 0, 0.0, np.clip(center - half, 0.0, 1.0))
    hi = np.where(k == trials, 1.0, np.clip(center + half, 0.0, 1.0))
    return lo, hi


@dataclass
class TailReport:
    """Empirical probabilities against a theoretical law or upper bound.

    ``kind == "exact"``: a point passes when the theoretical value lies in the
    Wilson interval. ``kind == "upper"``: a point passes when the bound is at
    least the lower Wilson edge.
    """

    law: str
    kind: str
    params: dict
    grid: list[float]
    counts: list[int]
    trials: int
    empirical: list[float]
    lower: list[float]
    upper: list[float]
    theoretical: list[float]
    point_pass: list[bool]
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        rows = [f"{self.law} {self.params} trials={self.trials}"]
        rows.append(f"{'x':>12} {'empirical':>12} {'lower':>12} {'upper':>12} {'theory':>12}  ok")
        for x, e, lo, hi, th, ok in zip(self.grid, self.empirical, self.lower, self.upper,
                                         self.theoretical, self.point_pass):
            rows.append(f"{x:12.5g} {e:12.5g} {lo:12.5g} {hi:12.5g} {th:12.5g}  {'PASS' if ok else 'FAIL'}")
        rows.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(rows)


def _report(law, kind, params, grid, counts, trials, theoretical, min_fraction=1.0, extra=None):
    counts = np.asarray(counts)
    lo, hi = wilson_interval(counts, trials)
    theoretical = np.asarray(theoretical, dtype=float)
    if kind == "exact":
        ok = (lo <= theoretical) & (theoretical <= hi)
        passed = bool(np.mean(ok) >= min_fraction) if len(ok) else True
    else:
        ok = theoretical >= lo
        passed = bool(np.all(ok))
    return TailReport(
        law=law, kind=kind, params=params, grid=[float(x) for x in grid],
        counts=[int(c) for c in counts], trials=int(trials),
        empirical=[float(c) / trials for c in counts],
        lower=[float(x) for x in lo], upper=[float(x) for x in hi],
        theoretical=[float(x) for x in theoretical],
        point_pass=[bool(x) for x in ok], passed=passed, extra=extra or {},
    )


def _count_below(values: np.ndarray, grid) -> np.ndarray:
    v = np.sort(values)
    return np.searchsorted(v, np.asarray(grid, dtype=float), side="left")


def smin_samples(m, delta: float, trials: int, rng: RngSpec, kind: str = "complex") -> np.ndarray:
    """Samples of ``sigma_n(M + delta G)`` over ``trials`` seeded trials.

    ``kind`` is ``"complex"`` (normalized complex Ginibre), ``"real"``
    (real Ginibre, ``N(0, 1/n)``) or ``"real-unit"`` (real ``N(0, 1)`` entries).
    """
    return singular_value_samples(m, delta, trials, rng, kind)[:, -1]


def singular_value_samples(m, delta: float, trials: int, rng: RngSpec, kind: str = "complex") -> np.ndarray:
    """All singular values of ``M + delta G``, shape ``(trials, n)``, decreasing."""
    a = as_cmatrix(m)
    n = a.shape[0]
    out = np.empty((trials, n))
    pos = 0
    for b, count in blocks(trials):
        g = rng.generator(b)
        if kind == "complex":
            noise = sample_complex_ginibre(n, g, size=count)
        elif kind == "real":
            noise = sample_real_ginibre(n, g, size=count)
        elif kind == "real-unit":
            noise = sample_real_ginibre(n, g, size=count) * math.sqrt(n)
        else:
            raise ValueError(f"unknown noise kind {kind!r}")
        out[pos : pos + count] = np.linalg.svd(a + delta * noise, compute_uv=False)
        pos += count
    return out


def _check_trials(trials, minimum=1000):
    if trials < minimum:
        raise ValueError(f"need at least {minimum} trials, got {trials}")


def verify_smin_law(n: int, eps_grid, trials: int, rng: RngSpec, min_fraction: float = 0.9) -> TailReport:
    """Empirical CDF of ``sigma_n(G_n)`` against ``1 - exp(-eps^2 n^2)``."""
    _check_trials(trials)
    s = smin_samples(np.zeros((n, n)), 1.0, trials, rng)
    counts = _count_below(s, eps_grid)
    return _report("smin-exact-law", "exact", {"n": n}, eps_grid, counts, trials,
                   smin_cdf_exact(n, eps_grid), min_fraction=min_fraction)


def verify_s1_tail(n: int, t_grid, trials: int, rng: RngSpec) -> TailReport:
    """Exceedance ``P[sigma_1(G_n) > 2 sqrt 2 + t]`` against ``2 exp(-n t^2)``."""
    _check_trials(trials)
    s1 = singular_value_samples(np.zeros((n, n)), 1.0, trials, rng)[:, 0]
    thresholds = 2 * math.sqrt(2) + np.asarray(t_grid, dtype=float)
    counts = trials - np.searchsorted(np.sort(s1), thresholds, side="right")
    bound = 2 * np.exp(-n * np.asarray(t_grid, dtype=float) ** 2)
    return _report("s1-tail", "upper", {"n": n}, t_grid, counts, trials, bound,
                   extra={"mean_s1": float(s1.mean()), "max_s1": float(s1.max())})


def verify_small_ball(m, delta: float, eps_grid, trials: int, rng: RngSpec) -> TailReport:
    """``P[sigma_n(M + delta G_n) < eps]`` against ``n^2 eps^2 / delta^2``."""
    _check_trials(trials)
    a = as_cmatrix(m)
    n = a.shape[0]
    s = smin_samples(a, delta, trials, rng)
    counts = _count_below(s, eps_grid)
    bound = n * n * np.asarray(eps_grid, dtype=float) ** 2 / delta**2
    return _report("small-ball", "upper", {"n": n, "delta": delta}, eps_grid, counts, trials, bound)


def verify_sst_real(a, eps_grid, trials: int, rng: RngSpec) -> TailReport:
    """``P[sigma_n(A + G) < eps]`` for real ``A`` and i.i.d. ``N(0, 1)`` ``G``, against ``eps sqrt(n)``."""
    _check_trials(trials)
    a = as_cmatrix(a)
    if np.any(a.imag != 0):
        raise ValueError("matrix must be real")
    n = a.shape[0]
    s = smin_samples(a, 1.0, trials, rng, kind="real-unit")
    counts = _count_below(s, eps_grid)
    bound = np.asarray(eps_grid, dtype=float) * math.sqrt(n)
    return _report("sst-real", "upper", {"n": n}, eps_grid, counts, trials, bound)
