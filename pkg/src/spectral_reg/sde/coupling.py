"""Coupled singular-value diffusions.

Complex case: singular values ``s`` of ``A + W_t / sqrt(n)`` with ``W`` a
matrix of complex Brownian motions,

    ds_i = dB_i / sqrt(2n) + dt / (2 s_i) * (1 - 1/(2n) + sum_{j != i} (s_i^2 + s_j^2) / (n (s_i^2 - s_j^2))).

By default it is integrated in ``lam = s^2``, where Ito's formula gives

    dlam_i = sqrt(2 lam_i / n) dB_i + (1 + (1/n) sum_{j != i} (lam_i + lam_j) / (lam_i - lam_j)) dt.

The drift is bounded near ``lam = 0`` while the ``s`` drift blows up like
``1/s``, which biases Euler-Maruyama for small singular values.
``squared=False`` integrates ``s`` directly.

Real case: squared singular values ``lam`` of ``A + W_t / sqrt(n)`` with
real Brownian ``W`` (Wishart process),

    dlam_i = (2 / sqrt(n)) sqrt(lam_i) dB_i + (1 + (1/n) sum_{j != i} (lam_i + lam_j) / (lam_i - lam_j)) dt.

For ``n >= 2`` the smallest ``lam`` reaches zero and is reflected there; the
integrator reflects negative proposals of the last coordinate.

``normalized=False`` selects the variant with diffusion ``2 sqrt(lam_i) / n``
and an unscaled interaction sum; it coincides with the above for ``n = 1``
only, and its marginals do not match direct sampling for ``n > 1``.

Two processes driven by the same Brownian increments stay ordered
coordinatewise when they start ordered.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from ..ensembles import RngSpec, singular_value_samples, smin_cdf_exact
from ..matrix_core import as_cmatrix, singular_values
from . import _backend

COLLISION_TOL = 1e-6
VALUE_FLOOR = 1e-8
STEP_FLOOR_FRACTION = 1e-12
#: halving levels below the base step during which the collision/floor thresholds apply
MAX_REFINE = 16


class CollisionError(ValueError):
    pass


class StepFloorError(RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


def _check_decreasing(x, tol, what, allow_zero=False):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) == 0:
        raise ValueError(f"{what} must be a nonempty vector")
    if np.any(np.diff(x) > -tol):
        raise CollisionError(f"{what} must be strictly decreasing with gaps >= {tol:g}: {x}")
    floor = 0.0 if allow_zero else tol
    if x[-1] < floor or (not allow_zero and x[-1] <= 0):
        raise CollisionError(f"{what} must be {'nonnegative' if allow_zero else 'positive'}: {x}")
    return x


def drift_complex(s, n: int | None = None, collision_tol: float = COLLISION_TOL) -> np.ndarray:
    """Drift of the complex singular-value SDE; the diffusion is the constant ``1/sqrt(2n)``."""
    s = _check_decreasing(s, collision_tol, "singular values")
    n = len(s) if n is None else n
    return np.array(_backend.get("python").drift(s.tolist(), 0, n, 0.0))


def real_coefficients(n: int, normalized: bool = True) -> tuple[float, float]:
    """``(interaction scale, diffusion scale)`` for the real Wishart SDE."""
    if normalized:
        return 1.0 / n, 2.0 / math.sqrt(n)
    return 1.0, 2.0 / n


def drift_real_wishart(lam, n: int | None = None, normalized: bool = True,
                       collision_tol: float = COLLISION_TOL):
    """Drift and diffusion vectors of the squared-singular-value SDE.

    ``lam`` must be strictly decreasing and nonnegative. Returns
    ``(drift, diffusion)``.
    """
    lam = _check_decreasing(lam, collision_tol, "squared singular values", allow_zero=True)
    n = len(lam) if n is None else n
    c_int, c_diff = real_coefficients(n, normalized)
    drift = np.array(_backend.get("python").drift(lam.tolist(), 1, n, c_int))
    return drift, c_diff * np.sqrt(lam)


def quasi_monotone_check(lam1, lam2, i: int, normalized: bool = True, tol: float = 1e-12) -> bool:
    """Check ``a_i(lam1) <= a_i(lam2)`` for the real drift at a touching pair.

    Precondition: ``lam1[i] == lam2[i]`` and ``lam1[j] <= lam2[j]`` otherwise,
    both strictly decreasing and nonnegative.
    """
    lam1 = np.asarray(lam1, dtype=float)
    lam2 = np.asarray(lam2, dtype=float)
    if lam1.shape != lam2.shape:
        raise ValueError("shape mismatch")
    if lam1[i] != lam2[i]:
        raise ValueError(f"coordinate {i} must coincide")
    if np.any(lam1 > lam2):
        raise ValueError("lam1 must be coordinatewise <= lam2")
    a1, _ = drift_real_wishart(lam1, normalized=normalized, collision_tol=0.0)
    a2, _ = drift_real_wishart(lam2, normalized=normalized, collision_tol=0.0)
    scale = max(1.0, abs(a1[i]), abs(a2[i]))
    return bool(a1[i] <= a2[i] + tol * scale)


# ---------------------------------------------------------------------------
# integration


@dataclass
class CoupledPaths:
    """Base-grid trajectories of two coupled processes, in singular-value units."""

    times: np.ndarray
    paths: np.ndarray  # (len(times), 2, n)
    variant: str
    status: str
    completed_steps: int
    halvings: int
    min_step: float
    tol_ord: float
    violations: int
    violations_beyond_tol: int
    max_violation: float
    min_value: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "process", "coordinate", "value"])
        for k, t in enumerate(self.times[: self.completed_steps + 1]):
            for p in range(self.paths.shape[1]):
                for i in range(self.paths.shape[2]):
                    w.writerow([repr(float(t)), p + 1, i + 1, repr(float(self.paths[k, p, i]))])
        return buf.getvalue()

    def summary(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("times", "paths")}
        return d


def _variant_code(variant: str) -> int:
    if variant == "complex":
        return 0
    if variant == "real":
        return 1
    raise ValueError(f"variant must be 'complex' or 'real', got {variant!r}")


@dataclass(frozen=True)
class _Scheme:
    """Integration coordinates and kernel coefficients for one variant."""

    code: int  # kernel drift form
    squared: bool  # integrate s^2 rather than s
    c_int: float
    c_diff: float

    def to_coords(self, s):
        s = np.asarray(s, dtype=float)
        return s**2 if self.squared else s.copy()

    def to_singular(self, x):
        return np.sqrt(x) if self.squared else x


def _scheme(variant: str, n: int, normalized: bool = True, squared: bool = True) -> _Scheme:
    code = _variant_code(variant)
    if code == 1:
        c_int, c_diff = real_coefficients(n, normalized)
        return _Scheme(1, True, c_int, c_diff)
    if squared:
        # Ito transform of the complex SDE to lam = s^2
        return _Scheme(1, True, 1.0 / n, math.sqrt(2.0 / n))
    return _Scheme(0, False, 0.0, 1.0 / math.sqrt(2 * n))


def _integrate(x0, t_final, steps, scheme, rng, key, collision_tol, value_floor, backend):
    """Run the kernel for ``m`` processes in integration coordinates."""
    x0 = np.ascontiguousarray(x0, dtype=float)
    m, n = x0.shape
    h = t_final / steps
    out = np.full((steps + 1, m, n), np.nan)
    if t_final == 0:
        out[:] = x0
        return out, (0, steps, 0, 0.0), h
    dW = rng.generator(*key, 0).standard_normal((steps, n)) * math.sqrt(h)
    bridge_gen = rng.generator(*key, 1)
    result = _backend.get(backend).evolve(
        x0, h, np.ascontiguousarray(dW), scheme.code, scheme.c_int, scheme.c_diff, collision_tol,
        value_floor, math.ldexp(h, -MAX_REFINE), STEP_FLOOR_FRACTION * t_final,
        bridge_gen.standard_normal, out,
    )
    return out, result, h


def couple_evolve(sigma1, sigma2, t_final: float, steps: int, variant: str, rng: RngSpec, *,
                  run: int = 0, normalized: bool = True, squared: bool = True,
                  collision_tol: float = COLLISION_TOL,
                  value_floor: float = VALUE_FLOOR, backend: str | None = None,
                  raise_on_floor: bool = False) -> CoupledPaths:
    """Euler-Maruyama for two processes sharing one Brownian increment per coordinate.

    ``sigma1 <= sigma2`` coordinatewise, each strictly decreasing. Base
    increments come from stream key ``(run, 0)``, bridge refinements from
    ``(run, 1)``. A step leaving the admissible set is halved (see
    :func:`spectral_reg.sde._kernels_py.evolve`). On reaching the step floor
    the partial path is returned with ``status == "step-floor"``.
    """
    s1 = np.asarray(sigma1, dtype=float)
    s2 = np.asarray(sigma2, dtype=float)
    if s1.shape != s2.shape:
        raise ValueError("initial vectors must have equal length")
    if np.any(s1 > s2):
        raise ValueError("initial condition must satisfy sigma1 <= sigma2 coordinatewise")
    if steps < 1 or t_final < 0:
        raise ValueError("need steps >= 1 and t_final >= 0")
    scheme = _scheme(variant, len(s1), normalized, squared)
    x1 = scheme.to_coords(s1)
    x2 = scheme.to_coords(s2)
    allow_zero = scheme.squared
    for x, what in ((x1, "process 1"), (x2, "process 2")):
        _check_decreasing(x, 0.0 if allow_zero else 0.0, what, allow_zero=allow_zero)
        if np.any(np.diff(x) >= 0):
            raise CollisionError(f"{what} initial values must be distinct")
    out, (status, completed, halvings, min_step), h = _integrate(
        np.stack([x1, x2]), t_final, steps, scheme, rng, (run,), collision_tol, value_floor,
        backend)
    n = len(s1)
    sv = scheme.to_singular(out)
    done = sv[: completed + 1]
    diff = done[:, 0, :] - done[:, 1, :]
    tol_ord = 10 * math.sqrt(h) / n
    positive = diff[diff > 0]
    paths = CoupledPaths(
        times=np.linspace(0.0, t_final, steps + 1), paths=sv, variant=variant,
        status="ok" if status == 0 else "step-floor", completed_steps=int(completed),
        halvings=int(halvings), min_step=float(min_step), tol_ord=tol_ord,
        violations=int(positive.size), violations_beyond_tol=int(np.count_nonzero(diff > tol_ord)),
        max_violation=float(positive.max()) if positive.size else 0.0,
        min_value=float(np.min(done)),
    )
    if status != 0 and raise_on_floor:
        raise StepFloorError(f"step floor reached after {completed} of {steps} steps", paths)
    return paths


def lift_initial(sigma, gap: float = 10 * COLLISION_TOL, squared: bool = True) -> np.ndarray:
    """Separate coincident (or zero) singular values so the SDE can start.

    Works in integration coordinates (``s^2`` when ``squared``, else ``s``)
    and enforces gaps of at least ``gap`` from the bottom up, the last value
    included; already separated vectors are returned unchanged.
    """
    s = np.sort(np.asarray(sigma, dtype=float))[::-1]
    x = s**2 if squared else s.copy()
    n = len(x)
    x[n - 1] = max(x[n - 1], gap)
    for i in range(n - 2, -1, -1):
        x[i] = max(x[i], x[i + 1] + gap)
    out = np.sqrt(x) if squared else x
    return s if np.array_equal(out, s) else out


def sde_endpoints(sigma0, t_final: float, steps: int, trials: int, variant: str, rng: RngSpec, *,
                  normalized: bool = True, squared: bool = True,
                  backend: str | None = None) -> tuple[np.ndarray, int]:
    """Endpoint singular values of ``trials`` independent single-process runs.

    Trial ``r`` uses stream keys ``(r, 0)`` and ``(r, 1)``. Returns the
    ``(trials, n)`` array and the number of runs that hit the step floor
    (their rows are NaN).
    """
    s0 = np.asarray(sigma0, dtype=float)
    scheme = _scheme(variant, len(s0), normalized, squared)
    x0 = scheme.to_coords(s0)[None, :]
    ends = np.empty((trials, len(s0)))
    aborted = 0
    for r in range(trials):
        out, (status, *_), _ = _integrate(x0, t_final, steps, scheme, rng, (r,), COLLISION_TOL,
                                          VALUE_FLOOR, backend)
        if status != 0:
            aborted += 1
            ends[r] = np.nan
        else:
            ends[r] = scheme.to_singular(out[-1, 0])
    return ends, aborted


@dataclass
class KSReport:
    variant: str
    n: int
    t: float
    trials: int
    steps: int
    initial: list[float]
    lifted: bool
    aborted: int
    two_sample_stat: list[float]
    two_sample_p: list[float]
    exact_law_stat: float | None
    exact_law_p: float | None
    alpha: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def marginal_law_check(a, t: float, trials: int, steps: int, variant: str, rng: RngSpec, *,
                       alpha: float = 0.01, normalized: bool = True, squared: bool = True,
                       backend: str | None = None) -> KSReport:
    """Compare SDE endpoints started at ``sigma(A)`` with direct samples of ``sigma(A + sqrt(t) G)``.

    Two-sample KS per coordinate with Bonferroni level ``alpha / n``. For
    ``A = 0`` in the complex case the smallest coordinate is also tested
    against ``1 - exp(-eps^2 n^2 / t)`` by one-sample KS at level ``alpha``.
    Coincident initial singular values are separated by :func:`lift_initial`
    with a gap of one base step's diffusion scale (``t / steps`` in squared
    coordinates, its square root otherwise).
    SDE trials use ``rng`` stream ``rng.stream``; direct samples use stream
    ``rng.stream + 1``.
    """
    a = as_cmatrix(a)
    n = a.shape[0]
    kind = _variant_code(variant)
    if kind == 1 and np.any(a.imag != 0):
        raise ValueError("real variant needs a real matrix")
    s0 = singular_values(a)
    if t == 0:
        return KSReport(variant, n, 0.0, trials, steps, s0.tolist(), False, 0, [0.0] * n, [1.0] * n,
                        None, None, alpha, True)
    sq = squared or kind == 1
    start = lift_initial(s0, gap=t / steps if sq else math.sqrt(t / steps), squared=sq)
    lifted = not np.array_equal(start, s0)
    ends, aborted = sde_endpoints(start, t, steps, trials, variant, rng, normalized=normalized,
                                  squared=squared, backend=backend)
    ends = ends[~np.isnan(ends).any(axis=1)]
    direct = singular_value_samples(a, math.sqrt(t), trials, rng.child(rng.stream + 1),
                                    kind="complex" if variant == "complex" else "real")
    stat, pv = [], []
    for i in range(n):
        res = stats.ks_2samp(ends[:, i], direct[:, i])
        stat.append(float(res.statistic))
        pv.append(float(res.pvalue))
    passed = all(p > alpha / n for p in pv)
    ex_stat = ex_p = None
    if variant == "complex" and not np.any(a):
        res = stats.kstest(ends[:, -1], lambda e: smin_cdf_exact(n, np.asarray(e) / math.sqrt(t)))
        ex_stat, ex_p = float(res.statistic), float(res.pvalue)
        passed = passed and ex_p > alpha
    return KSReport(variant=variant, n=n, t=float(t), trials=trials, steps=steps,
                    initial=start.tolist(), lifted=bool(lifted), aborted=aborted,
                    two_sample_stat=stat, two_sample_p=pv, exact_law_stat=ex_stat,
                    exact_law_p=ex_p, alpha=alpha, passed=bool(passed and aborted == 0))
