"""Gaussian regularization of the eigenvector condition number.

A matrix ``A`` is perturbed by a scaled complex Ginibre sample until two
events certify a polynomial bound on the eigenvector condition number: the
perturbation is small in operator norm, and the overlap sum of the perturbed
matrix over a disk containing its spectrum is at most ``s`` times its
expected-value bound. The constants ``(t, s)`` come from :func:`optimize_st`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .conditioning import report_from_spectral, overlap_sum_in_region
from .ensembles import RngSpec, blocks, sample_complex_ginibre
from .matrix_core import NearDefectiveError, as_cmatrix, eig, operator_norm
from .regions import Disk, Region

SQRT8 = 2 * math.sqrt(2)


def st_constraint(t: float, s: float) -> float:
    """Left side of ``2 exp(-4 (t - 2 sqrt 2)^2) + 1/s < 1``."""
    return 2 * math.exp(-4 * (t - SQRT8) ** 2) + 1 / s


@dataclass(frozen=True)
class StOptimum:
    t: float
    s: float
    objective: float


@lru_cache(maxsize=None)
def optimize_st() -> StOptimum:
    """Minimize ``t sqrt(s)`` subject to the union-bound constraint.

    At the optimum the constraint is active, so ``s`` is eliminated as
    ``1 / (1 - 2 exp(-4 (t - 2 sqrt 2)^2))`` and ``t`` is found by bounded
    scalar minimization. The returned ``s`` is nudged up by a relative
    ``1e-9`` so that the constraint holds strictly.
    """

    def s_of(t):
        return 1.0 / (1.0 - 2.0 * math.exp(-4.0 * (t - SQRT8) ** 2))

    t_min = SQRT8 + math.sqrt(math.log(2.0)) / 2  # s_of blows up here
    res = minimize_scalar(lambda t: t * math.sqrt(s_of(t)), bounds=(t_min + 1e-9, t_min + 5.0),
                          method="bounded", options={"xatol": 1e-12})
    t = float(res.x)
    s = s_of(t) * (1 + 1e-9)
    return StOptimum(t=t, s=s, objective=t * math.sqrt(s))


def theorem_a_bound(n: int, delta: float) -> float:
    """``4 n^{3/2} (1 + 1/delta)``."""
    return 4 * n**1.5 * (1 + 1 / delta)


@dataclass
class RegularizationResult:
    E: np.ndarray
    kappa_V_after: float
    overlap_sum: float
    norm_E: float
    attempts_used: int
    norm_event_ok: bool
    overlap_event_ok: bool
    delta: float
    scale: float
    bound: float
    rejected_defective: int = 0

    @property
    def certified(self) -> bool:
        return self.norm_event_ok and self.overlap_event_ok

    def to_dict(self) -> dict:
        return {
            "kappa_V_after": self.kappa_V_after,
            "overlap_sum": self.overlap_sum,
            "norm_E": self.norm_E,
            "attempts_used": self.attempts_used,
            "certificate": {"norm_event": self.norm_event_ok, "overlap_event": self.overlap_event_ok},
            "certified": self.certified,
            "delta": self.delta,
            "scale": self.scale,
            "bound": self.bound,
            "within_bound": self.kappa_V_after <= self.bound * (1 + 1e-6),
            "rejected_defective": self.rejected_defective,
        }


def regularize(a, delta: float, max_attempts: int, rng: RngSpec) -> RegularizationResult:
    """Search for a perturbation ``E`` with ``||E|| <= delta ||A||`` and certified ``kappa_V``.

    ``A`` is rescaled to unit norm internally (``A = 0`` uses an absolute
    budget ``||E|| <= delta``). Attempt ``k`` samples ``E' = (delta/t) G_n``
    from sub-stream ``k`` and is accepted when ``||E'|| < delta`` and the
    overlap sum over ``D(0, 1 + delta)`` is at most
    ``s n^2 (1 + delta)^2 / (delta/t)^2``. Without a certificate the
    attempt with the smallest ``kappa_V`` is returned.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if max_attempts < 1:
        raise ValueError("max_attempts must be positive")
    a = as_cmatrix(a)
    n = a.shape[0]
    norm_a = operator_norm(a)
    scale = norm_a if norm_a > 0 else 1.0
    a_hat = a / scale
    opt = optimize_st()
    step = delta / opt.t
    radius = operator_norm(a_hat) + delta
    region = Disk(0j, radius)
    overlap_cap = opt.s * n * n * region.area / (math.pi * step * step)

    best = None
    defective = 0
    for k in range(max_attempts):
        e_hat = step * sample_complex_ginibre(n, rng.generator(k))
        norm_ok = operator_norm(e_hat) < delta
        try:
            sd = eig(a_hat + e_hat)
        except NearDefectiveError:
            defective += 1
            continue
        rep = report_from_spectral(sd)
        inside = overlap_sum_in_region(None, region, spectral=sd)
        overlap_ok = inside <= overlap_cap
        result = RegularizationResult(
            E=scale * e_hat, kappa_V_after=rep.kappa_V_unit_columns, overlap_sum=rep.overlap_sum,
            norm_E=scale * operator_norm(e_hat), attempts_used=k + 1,
            norm_event_ok=bool(norm_ok), overlap_event_ok=bool(overlap_ok),
            delta=delta, scale=scale, bound=theorem_a_bound(n, delta), rejected_defective=defective,
        )
        if result.certified:
            return result
        if best is None or result.kappa_V_after < best.kappa_V_after:
            best = result
    if best is None:
        raise NearDefectiveError((0j, 0j), 0.0, 0.0)
    best.attempts_used = max_attempts
    best.rejected_defective = defective
    return best


@dataclass
class DaviesResult:
    E: np.ndarray
    epsilon: float
    delta: float
    objective: float
    bound: float
    regularization: RegularizationResult

    @property
    def within_bound(self) -> bool:
        return self.objective <= self.bound

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon, "delta": self.delta, "objective": self.objective,
            "bound": self.bound, "within_bound": self.within_bound,
            "certified": self.regularization.certified,
            "regularization": self.regularization.to_dict(),
        }


def davies_tradeoff(a, epsilon: float, rng: RngSpec, max_attempts: int = 100) -> DaviesResult:
    """Regularize with ``delta = 2 n^{3/4} sqrt(eps)`` (clamped below 1).

    Returns ``E`` and the realized ``kappa_V(A + E) eps + ||E||``, to be
    compared with ``8 n^{3/2} sqrt(eps)``.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    a = as_cmatrix(a)
    n = a.shape[0]
    if operator_norm(a) > 1 + 1e-12:
        raise ValueError("||A|| must be at most 1")
    delta = min(2 * n**0.75 * math.sqrt(epsilon), math.nextafter(1.0, 0.0))
    res = regularize(a, delta, max_attempts, rng)
    objective = res.kappa_V_after * epsilon + res.norm_E
    return DaviesResult(E=res.E, epsilon=epsilon, delta=delta, objective=objective,
                        bound=8 * n**1.5 * math.sqrt(epsilon), regularization=res)


# ---------------------------------------------------------------------------
# Monte Carlo experiments


@dataclass
class TheoremBReport:
    n: int
    delta: float
    region: dict
    trials: int
    mean: float
    std_error: float
    lower: float
    upper: float
    bound: float
    resampled: int
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


Z99 = 2.5758293035489004  # two-sided 99% normal quantile


def overlap_sums_in_region(a, delta: float, region: Region, trials: int, rng: RngSpec):
    """Per-trial ``sum_{lambda in B} kappa(lambda)^2`` for ``A + delta G_n``.

    Trial ``i`` uses stream key ``(block, 0)`` of its block; a near-defective
    draw is replaced by the next draw from the same block generator.
    """
    a = as_cmatrix(a)
    n = a.shape[0]
    sums = np.empty(trials)
    resampled = 0
    pos = 0
    for b, count in blocks(trials):
        g = rng.generator(b)
        for _ in range(count):
            while True:
                m = a + delta * sample_complex_ginibre(n, g)
                try:
                    sd = eig(m)
                    break
                except NearDefectiveError:
                    resampled += 1
            sums[pos] = overlap_sum_in_region(None, region, spectral=sd)
            pos += 1
    return sums, resampled


def verify_theorem_b(a, delta: float, region: Region, trials: int, rng: RngSpec) -> TheoremBReport:
    """Monte Carlo mean overlap sum in ``region`` against ``n^2 vol(B) / (pi delta^2)``.

    Passes when the bound is at least the lower 99% normal-approximation edge
    of the mean.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    a = as_cmatrix(a)
    n = a.shape[0]
    bound = n * n * region.area / (math.pi * delta * delta)
    sums, resampled = overlap_sums_in_region(a, delta, region, trials, rng)
    mean = float(sums.mean())
    se = float(sums.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    lower, upper = mean - Z99 * se, mean + Z99 * se
    return TheoremBReport(n=n, delta=delta, region=region.to_dict(), trials=trials, mean=mean,
                          std_error=se, lower=lower, upper=upper, bound=bound,
                          resampled=resampled, passed=bool(bound >= lower))


def jordan_block(n: int) -> np.ndarray:
    return np.diag(np.ones(n - 1, dtype=np.complex128), 1)


@dataclass
class JordanScan:
    n: int
    deltas: list[float]
    trials: int
    min_kappa: list[float]
    median_kappa: list[float]
    davies_upper: list[float]
    slope: float
    intercept: float

    def to_dict(self) -> dict:
        return asdict(self)


def jordan_scan(n: int, deltas, trials: int, rng: RngSpec) -> JordanScan:
    """Minimum over trials of ``kappa_V(J + delta E)`` with ``E = G_n / ||G_n||``.

    The slope is a least-squares fit of ``log min kappa_V`` against
    ``log(1/delta)``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    deltas = [float(d) for d in deltas]
    j = jordan_block(n)
    mins, meds = [], []
    for k, delta in enumerate(deltas):
        g = rng.generator(k)
        vals = []
        for _ in range(trials):
            while True:
                e = sample_complex_ginibre(n, g)
                e = e / operator_norm(e)
                try:
                    vals.append(report_from_spectral(eig(j + delta * e)).kappa_V_unit_columns)
                    break
                except NearDefectiveError:
                    pass
        mins.append(float(np.min(vals)))
        meds.append(float(np.median(vals)))
    x = np.log(1 / np.asarray(deltas))
    slope, intercept = np.polyfit(x, np.log(mins), 1) if len(deltas) > 1 else (float("nan"), float("nan"))
    return JordanScan(n=n, deltas=deltas, trials=trials, min_kappa=mins, median_kappa=meds,
                      davies_upper=[2 / d ** (1 - 1 / n) for d in deltas],
                      slope=float(slope), intercept=float(intercept))


@dataclass
class BulkProfile:
    n: int
    trials: int
    r_edges: list[float]
    bin_centers: list[float]
    mean_overlap_over_n: list[float]
    counts: list[int]
    total_over_n2: float
    total_over_n2_std_error: float
    theory: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def bulk_overlap_profile(n: int, trials: int, r_edges, rng: RngSpec) -> BulkProfile:
    """Bin Ginibre eigenvalues by modulus; report mean ``kappa^2 / n`` per bin.

    ``r_edges`` are bin edges in ``|lambda|``. Also reports the mean of
    ``sum_i kappa(lambda_i)^2 / n^2`` over trials.
    """
    r_edges = np.asarray(r_edges, dtype=float)
    sums = np.zeros(len(r_edges) - 1)
    counts = np.zeros(len(r_edges) - 1, dtype=int)
    totals = []
    for b, count in blocks(trials):
        g = rng.generator(b)
        for _ in range(count):
            while True:
                try:
                    sd = eig(sample_complex_ginibre(n, g))
                    break
                except NearDefectiveError:
                    pass
            k2 = sd.overlaps**2
            totals.append(k2.sum() / n**2)
            idx = np.digitize(np.abs(sd.eigenvalues), r_edges) - 1
            ok = (idx >= 0) & (idx < len(sums))
            np.add.at(sums, idx[ok], k2[ok] / n)
            np.add.at(counts, idx[ok], 1)
    centers = 0.5 * (r_edges[1:] + r_edges[:-1])
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    totals = np.asarray(totals)
    return BulkProfile(
        n=n, trials=trials, r_edges=r_edges.tolist(), bin_centers=centers.tolist(),
        mean_overlap_over_n=[float(x) for x in means], counts=counts.tolist(),
        total_over_n2=float(totals.mean()),
        total_over_n2_std_error=float(totals.std(ddof=1) / math.sqrt(len(totals))) if len(totals) > 1 else 0.0,
        theory=[float(1 - c * c) for c in centers],
    )
